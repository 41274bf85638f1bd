#ifndef DETOURS_DETOURS_H
#define DETOURS_DETOURS_H

/*
 * C surface of the detours toolkit. All functionality is driven by JSON
 * config documents; handles are opaque and calls report status codes,
 * with the message of the last failure kept on the session.
 */

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define DTR_API __declspec(dllexport)
#else
#define DTR_API __attribute__((visibility("default")))
#endif

typedef enum dtr_status {
    DTR_OK = 0,
    DTR_ERR_CONFIG = 1, /* invalid config or missing inputs */
    DTR_ERR_RUNTIME = 2 /* any other failure */
} dtr_status;

typedef struct dtr_session dtr_session;

DTR_API const char* dtr_version(void);

DTR_API dtr_session* dtr_session_new(void);
DTR_API void dtr_session_free(dtr_session* s);

/* Message of the most recent failing call on this session; empty string
 * when the last call succeeded. Owned by the session. */
DTR_API const char* dtr_session_error(const dtr_session* s);

/* Pipeline commands. Each takes a UTF-8 JSON config document, writes its
 * artifacts plus a run manifest, and returns a status. */
DTR_API dtr_status dtr_gen_world(dtr_session* s, const char* config_json);
DTR_API dtr_status dtr_summarize(dtr_session* s, const char* config_json);
DTR_API dtr_status dtr_mine_pairs(dtr_session* s, const char* config_json);
DTR_API dtr_status dtr_gen_detours(dtr_session* s, const char* config_json);
DTR_API dtr_status dtr_curate(dtr_session* s, const char* config_json);
DTR_API dtr_status dtr_train(dtr_session* s, const char* config_json);
DTR_API dtr_status dtr_eval(dtr_session* s, const char* config_json);

/* Gradient verification; on success *max_rel_err holds the worst relative
 * error across all checks. */
DTR_API dtr_status dtr_gradcheck(dtr_session* s, const char* config_json, double* max_rel_err);

/* Renders report.json files as an aligned text table. The returned string
 * stays valid until the next call on the session. */
DTR_API dtr_status dtr_report(dtr_session* s, const char* config_json, const char** table_out);

/* Read-only view of a generated world directory. */
typedef struct dtr_world dtr_world;
DTR_API dtr_status dtr_world_open(dtr_session* s, const char* dir, dtr_world** out);
DTR_API void dtr_world_close(dtr_world* w);
DTR_API int dtr_world_video_count(const dtr_world* w);
DTR_API int dtr_world_tuple_count(const dtr_world* w);

#ifdef __cplusplus
}
#endif

#endif /* DETOURS_DETOURS_H */
