// Command-line front end; everything goes through the shared-library C API.

#include <detours/detours.h>

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

using nlohmann::json;

namespace {

json load_config_file(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream is(path);
    if (!is) {
        std::cerr << "error: cannot open config file: " << path << "\n";
        std::exit(1);
    }
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        std::cerr << "error: config file is not valid JSON: " << e.what() << "\n";
        std::exit(1);
    }
}

struct Session {
    dtr_session* s = dtr_session_new();
    ~Session() { dtr_session_free(s); }
};

int finish(dtr_status status, dtr_session* s) {
    if (status != DTR_OK) std::cerr << "error: " << dtr_session_error(s) << "\n";
    return static_cast<int>(status);
}

// Flags override the config file; only flags the user actually passed.
template <class T>
void put_if(CLI::App* cmd, const std::string& flag, json& cfg, const std::string& key, const T& v) {
    if (cmd->count(flag)) cfg[key] = v;
}

template <class T>
void put_nested_if(CLI::App* cmd, const std::string& flag, json& cfg, const std::string& outer,
                   const std::string& key, const T& v) {
    if (cmd->count(flag)) cfg[outer][key] = v;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"detours: weakly-supervised video detour laboratory"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(dtr_version()));

    std::string config_path, out, world_dir, summaries, pairs, detours_path, split, timestamps;
    std::string ckpt_retrieval, ckpt_localization, resume, task, backend_kind, endpoint, cache;
    std::string gradcheck_out, report_out;
    std::vector<std::string> report_inputs;
    uint64_t seed = 0;
    int tasks = 0, videos_per_task = 0, feature_dim = 0, epochs = 0, batch_size = 0;
    int max_inflight = 0, max_tuples = 0, d_model = 0, layers = 0, heads = 0, ffn = 0, max_seq = 0;
    int max_pairs_per_video = 0;
    double sigma = 0.0, novel_fraction = 0.0, threshold = 0.0, lr = 0.0, p_hard = 0.0;
    double fault_rate = 0.0, eps = 0.0;
    bool no_baselines = false;
    std::vector<int> ks;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "JSON config file; flags override it");
    };
    auto add_backend = [&](CLI::App* cmd) {
        cmd->add_option("--backend-kind", backend_kind, "offline or http");
        cmd->add_option("--endpoint", endpoint, "chat completions base URL (http backend)");
        cmd->add_option("--fault-rate", fault_rate, "offline fault injection rate");
        cmd->add_option("--max-inflight", max_inflight, "parallel in-flight completions");
    };
    auto backend_overrides = [&](CLI::App* cmd, json& cfg) {
        put_nested_if(cmd, "--backend-kind", cfg, "backend", "kind", backend_kind);
        put_nested_if(cmd, "--endpoint", cfg, "backend", "endpoint", endpoint);
        put_nested_if(cmd, "--fault-rate", cfg, "backend", "fault_rate", fault_rate);
        put_if(cmd, "--max-inflight", cfg, "max_inflight", max_inflight);
    };

    auto* gen = app.add_subcommand("gen-world", "generate a synthetic recipe world");
    add_common(gen);
    gen->add_option("--out", out, "output directory");
    gen->add_option("--seed", seed, "world seed");
    gen->add_option("--tasks", tasks, "number of tasks");
    gen->add_option("--videos-per-task", videos_per_task, "videos per task");
    gen->add_option("--feature-dim", feature_dim, "feature dimension D");
    gen->add_option("--sigma", sigma, "feature noise sigma");
    gen->add_option("--novel-fraction", novel_fraction, "fraction of novel tasks");

    auto* summ = app.add_subcommand("summarize", "prompt for summaries and parse them");
    add_common(summ);
    summ->add_option("--world", world_dir, "world directory");
    summ->add_option("--out", out, "output directory");
    summ->add_option("--split", split, "train or all");
    add_backend(summ);

    auto* mine = app.add_subcommand("mine-pairs", "select similar summary pairs");
    add_common(mine);
    mine->add_option("--summaries", summaries, "summaries.jsonl path");
    mine->add_option("--out", out, "pairs.jsonl path");
    mine->add_option("--threshold", threshold, "cosine threshold");
    mine->add_option("--max-pairs-per-video", max_pairs_per_video, "cap per video, 0 = unlimited");
    mine->add_option("--cache", cache, "embedding cache (DTRF) path");

    auto* gend = app.add_subcommand("gen-detours", "prompt for detours over mined pairs");
    add_common(gend);
    gend->add_option("--world", world_dir, "world directory");
    gend->add_option("--summaries", summaries, "summaries.jsonl path");
    gend->add_option("--pairs", pairs, "pairs.jsonl path");
    gend->add_option("--out", out, "output directory");
    add_backend(gend);

    auto* cur = app.add_subcommand("curate", "summarize, mine, generate and validate in one pass");
    add_common(cur);
    cur->add_option("--world", world_dir, "world directory");
    cur->add_option("--out", out, "output directory");
    cur->add_option("--split", split, "train or all");
    cur->add_option("--threshold", threshold, "pair mining threshold");
    cur->add_option("--timestamps", timestamps, "llm or parser");
    add_backend(cur);

    auto* tr = app.add_subcommand("train", "train the retrieval or localization model");
    add_common(tr);
    tr->add_option("--world", world_dir, "world directory");
    tr->add_option("--detours", detours_path, "detours.jsonl path");
    tr->add_option("--out", out, "run directory");
    tr->add_option("--task", task, "retrieval or localization");
    tr->add_option("--lr", lr, "learning rate");
    tr->add_option("--epochs", epochs, "epochs");
    tr->add_option("--batch-size", batch_size, "batch size");
    tr->add_option("--p-hard", p_hard, "same-task negative probability");
    tr->add_option("--seed", seed, "training seed");
    tr->add_option("--resume", resume, "checkpoint directory to resume from");
    tr->add_option("--d-model", d_model, "model width");
    tr->add_option("--layers", layers, "encoder layers");
    tr->add_option("--heads", heads, "attention heads");
    tr->add_option("--ffn", ffn, "feed-forward width");
    tr->add_option("--max-seq", max_seq, "maximum assembled sequence length");

    auto* ev = app.add_subcommand("eval", "benchmark checkpoints and baselines");
    add_common(ev);
    ev->add_option("--world", world_dir, "world directory");
    ev->add_option("--out", out, "output directory");
    ev->add_option("--checkpoint-retrieval", ckpt_retrieval, "retrieval checkpoint dir");
    ev->add_option("--checkpoint-localization", ckpt_localization, "localization checkpoint dir");
    ev->add_option("--summaries", summaries, "summaries.jsonl for the text_only baseline");
    ev->add_option("--max-tuples-per-split", max_tuples, "cap evaluated tuples per split");
    ev->add_option("--ks", ks, "recall@k values");
    ev->add_flag("--no-baselines", no_baselines, "skip the late-fusion baselines");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference gradient verification");
    add_common(gc);
    gc->add_option("--seed", seed, "seed");
    gc->add_option("--eps", eps, "finite-difference step");
    gc->add_option("--out", gradcheck_out, "write the per-check breakdown JSON here");

    auto* rep = app.add_subcommand("report", "render report.json files as a table");
    add_common(rep);
    rep->add_option("inputs", report_inputs, "report.json paths");
    rep->add_option("--out", report_out, "merged CSV output path");

    CLI11_PARSE(app, argc, argv);

    Session session;
    json cfg = load_config_file(config_path);

    if (gen->parsed()) {
        put_if(gen, "--out", cfg, "out", out);
        put_nested_if(gen, "--seed", cfg, "world", "seed", seed);
        put_nested_if(gen, "--tasks", cfg, "world", "n_tasks", tasks);
        put_nested_if(gen, "--videos-per-task", cfg, "world", "videos_per_task", videos_per_task);
        put_nested_if(gen, "--feature-dim", cfg, "world", "feature_dim", feature_dim);
        put_nested_if(gen, "--sigma", cfg, "world", "noise_sigma", sigma);
        put_nested_if(gen, "--novel-fraction", cfg, "world", "novel_task_fraction", novel_fraction);
        return finish(dtr_gen_world(session.s, cfg.dump().c_str()), session.s);
    }
    if (summ->parsed()) {
        put_if(summ, "--world", cfg, "world", world_dir);
        put_if(summ, "--out", cfg, "out", out);
        put_if(summ, "--split", cfg, "split", split);
        backend_overrides(summ, cfg);
        return finish(dtr_summarize(session.s, cfg.dump().c_str()), session.s);
    }
    if (mine->parsed()) {
        put_if(mine, "--summaries", cfg, "summaries", summaries);
        put_if(mine, "--out", cfg, "out", out);
        put_if(mine, "--threshold", cfg, "threshold", threshold);
        put_if(mine, "--max-pairs-per-video", cfg, "max_pairs_per_video", max_pairs_per_video);
        put_if(mine, "--cache", cfg, "cache", cache);
        return finish(dtr_mine_pairs(session.s, cfg.dump().c_str()), session.s);
    }
    if (gend->parsed()) {
        put_if(gend, "--world", cfg, "world", world_dir);
        put_if(gend, "--summaries", cfg, "summaries", summaries);
        put_if(gend, "--pairs", cfg, "pairs", pairs);
        put_if(gend, "--out", cfg, "out", out);
        backend_overrides(gend, cfg);
        return finish(dtr_gen_detours(session.s, cfg.dump().c_str()), session.s);
    }
    if (cur->parsed()) {
        put_if(cur, "--world", cfg, "world", world_dir);
        put_if(cur, "--out", cfg, "out", out);
        put_if(cur, "--split", cfg, "split", split);
        put_if(cur, "--threshold", cfg, "threshold", threshold);
        put_if(cur, "--timestamps", cfg, "timestamps", timestamps);
        backend_overrides(cur, cfg);
        return finish(dtr_curate(session.s, cfg.dump().c_str()), session.s);
    }
    if (tr->parsed()) {
        put_if(tr, "--world", cfg, "world", world_dir);
        put_if(tr, "--detours", cfg, "detours", detours_path);
        put_if(tr, "--out", cfg, "out", out);
        put_if(tr, "--resume", cfg, "resume", resume);
        put_nested_if(tr, "--task", cfg, "train", "task", task);
        put_nested_if(tr, "--lr", cfg, "train", "lr", lr);
        put_nested_if(tr, "--epochs", cfg, "train", "epochs", epochs);
        put_nested_if(tr, "--batch-size", cfg, "train", "batch_size", batch_size);
        put_nested_if(tr, "--p-hard", cfg, "train", "p_hard", p_hard);
        put_nested_if(tr, "--seed", cfg, "train", "seed", seed);
        put_nested_if(tr, "--d-model", cfg, "model", "d_model", d_model);
        put_nested_if(tr, "--layers", cfg, "model", "n_layers", layers);
        put_nested_if(tr, "--heads", cfg, "model", "n_heads", heads);
        put_nested_if(tr, "--ffn", cfg, "model", "ffn_dim", ffn);
        put_nested_if(tr, "--max-seq", cfg, "model", "max_seq", max_seq);
        return finish(dtr_train(session.s, cfg.dump().c_str()), session.s);
    }
    if (ev->parsed()) {
        put_if(ev, "--world", cfg, "world", world_dir);
        put_if(ev, "--out", cfg, "out", out);
        put_if(ev, "--checkpoint-retrieval", cfg, "checkpoint_retrieval", ckpt_retrieval);
        put_if(ev, "--checkpoint-localization", cfg, "checkpoint_localization", ckpt_localization);
        put_if(ev, "--summaries", cfg, "summaries", summaries);
        put_nested_if(ev, "--max-tuples-per-split", cfg, "bench", "max_tuples_per_split", max_tuples);
        put_nested_if(ev, "--ks", cfg, "bench", "recall_ks", ks);
        if (ev->count("--no-baselines")) cfg["bench"]["baselines"] = false;
        return finish(dtr_eval(session.s, cfg.dump().c_str()), session.s);
    }
    if (gc->parsed()) {
        put_if(gc, "--seed", cfg, "seed", seed);
        put_if(gc, "--eps", cfg, "eps", eps);
        put_if(gc, "--out", cfg, "out", gradcheck_out);
        double max_rel_err = 0.0;
        const dtr_status st = dtr_gradcheck(session.s, cfg.dump().c_str(), &max_rel_err);
        if (st != DTR_OK) return finish(st, session.s);
        std::printf("gradcheck max relative error: %.3e (tolerance 1e-4)\n", max_rel_err);
        if (max_rel_err > 1e-4) {
            std::fprintf(stderr, "error: gradient check failed tolerance\n");
            return 2;
        }
        return 0;
    }
    if (rep->parsed()) {
        if (!report_inputs.empty()) cfg["inputs"] = report_inputs;
        put_if(rep, "--out", cfg, "out", report_out);
        const char* table = nullptr;
        const dtr_status st = dtr_report(session.s, cfg.dump().c_str(), &table);
        if (st != DTR_OK) return finish(st, session.s);
        std::fputs(table, stdout);
        return 0;
    }
    return 1;
}
