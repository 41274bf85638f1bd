#include "detours/detours.h"

#include "core/errors.hpp"
#include "pipeline/pipeline.hpp"
#include "world/world.hpp"

#include <json.hpp>

#include <string>

using nlohmann::json;

struct dtr_session {
    std::string last_error;
    std::string report_table;
};

struct dtr_world {
    detours::world::World w;
};

namespace {

// Runs fn under the session's error trap; exception type decides the code.
template <class Fn>
dtr_status guarded(dtr_session* s, Fn&& fn) {
    if (!s) return DTR_ERR_RUNTIME;
    s->last_error.clear();
    try {
        fn();
        return DTR_OK;
    } catch (const detours::ConfigError& e) {
        s->last_error = e.what();
        return DTR_ERR_CONFIG;
    } catch (const json::parse_error& e) {
        s->last_error = std::string("config is not valid JSON: ") + e.what();
        return DTR_ERR_CONFIG;
    } catch (const std::exception& e) {
        s->last_error = e.what();
        return DTR_ERR_RUNTIME;
    }
}

json parse_config(const char* config_json) {
    if (!config_json) return json::object();
    return json::parse(config_json);
}

} // namespace

extern "C" {

const char* dtr_version(void) {
    return detours::pipeline::kToolVersion;
}

dtr_session* dtr_session_new(void) {
    return new dtr_session();
}

void dtr_session_free(dtr_session* s) {
    delete s;
}

const char* dtr_session_error(const dtr_session* s) {
    return s ? s->last_error.c_str() : "null session";
}

dtr_status dtr_gen_world(dtr_session* s, const char* config_json) {
    return guarded(s, [&] { detours::pipeline::cmd_gen_world(parse_config(config_json)); });
}

dtr_status dtr_summarize(dtr_session* s, const char* config_json) {
    return guarded(s, [&] { detours::pipeline::cmd_summarize(parse_config(config_json)); });
}

dtr_status dtr_mine_pairs(dtr_session* s, const char* config_json) {
    return guarded(s, [&] { detours::pipeline::cmd_mine_pairs(parse_config(config_json)); });
}

dtr_status dtr_gen_detours(dtr_session* s, const char* config_json) {
    return guarded(s, [&] { detours::pipeline::cmd_gen_detours(parse_config(config_json)); });
}

dtr_status dtr_curate(dtr_session* s, const char* config_json) {
    return guarded(s, [&] { detours::pipeline::cmd_curate(parse_config(config_json)); });
}

dtr_status dtr_train(dtr_session* s, const char* config_json) {
    return guarded(s, [&] { detours::pipeline::cmd_train(parse_config(config_json)); });
}

dtr_status dtr_eval(dtr_session* s, const char* config_json) {
    return guarded(s, [&] { detours::pipeline::cmd_eval(parse_config(config_json)); });
}

dtr_status dtr_gradcheck(dtr_session* s, const char* config_json, double* max_rel_err) {
    return guarded(s, [&] {
        const double err = detours::pipeline::cmd_gradcheck(parse_config(config_json));
        if (max_rel_err) *max_rel_err = err;
    });
}

dtr_status dtr_report(dtr_session* s, const char* config_json, const char** table_out) {
    return guarded(s, [&] {
        s->report_table = detours::pipeline::cmd_report(parse_config(config_json));
        if (table_out) *table_out = s->report_table.c_str();
    });
}

dtr_status dtr_world_open(dtr_session* s, const char* dir, dtr_world** out) {
    return guarded(s, [&] {
        if (!dir || !out) throw detours::ConfigError("dir", "null argument");
        auto* handle = new dtr_world{detours::world::load_world(dir)};
        *out = handle;
    });
}

void dtr_world_close(dtr_world* w) {
    delete w;
}

int dtr_world_video_count(const dtr_world* w) {
    return w ? static_cast<int>(w->w.videos.size()) : 0;
}

int dtr_world_tuple_count(const dtr_world* w) {
    return w ? static_cast<int>(w->w.gt.size()) : 0;
}

} // extern "C"
