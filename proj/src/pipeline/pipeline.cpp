#include "pipeline/pipeline.hpp"

#include "bench/bench.hpp"
#include "core/errors.hpp"
#include "core/io.hpp"
#include "llm/backend.hpp"
#include "mine/mine.hpp"
#include "model/checkpoint.hpp"
#include "parse/parse.hpp"
#include "tad/gradcheck.hpp"
#include "train/train.hpp"
#include "world/world.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <iomanip>
#include <sstream>
#include <thread>

namespace detours::pipeline {

using nlohmann::json;

namespace {

std::string now_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

std::string required_string(const json& cfg, const std::string& key) {
    if (!cfg.contains(key) || !cfg.at(key).is_string() || cfg.at(key).get<std::string>().empty())
        throw ConfigError(key, "required path missing");
    return cfg.at(key).get<std::string>();
}

void require_exists(const std::filesystem::path& p, const std::string& field) {
    if (!std::filesystem::exists(p))
        throw ConfigError(field, "path does not exist: " + p.string());
}

llm::BackendConfig backend_config(const json& cfg) {
    return llm::BackendConfig::from_json(cfg.value("backend", json::object()));
}

struct StageStats {
    int attempted = 0;
    int accepted = 0;
    std::map<std::string, int> reasons;

    int rejected() const {
        int n = 0;
        for (const auto& [r, c] : reasons) n += c;
        return n;
    }
    json to_json() const {
        return json{{"attempted", attempted},
                    {"accepted", accepted},
                    {"rejected", rejected()},
                    {"reasons", reasons}};
    }
};

// Issues completions for `prompts` with up to max_inflight requests on
// the wire, committing results in input order.
std::vector<std::string> complete_all(llm::ChatBackend& backend,
                                      const std::vector<std::vector<llm::ChatMessage>>& prompts,
                                      int max_inflight) {
    std::vector<std::string> out(prompts.size());
    if (max_inflight <= 1 || prompts.size() <= 1) {
        for (size_t i = 0; i < prompts.size(); ++i) out[i] = backend.complete(prompts[i]);
        return out;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> workers;
    std::vector<std::string> errors(prompts.size());
    const int n_workers = std::min<int>(max_inflight, static_cast<int>(prompts.size()));
    for (int wi = 0; wi < n_workers; ++wi) {
        workers.emplace_back([&] {
            while (true) {
                const size_t i = next.fetch_add(1);
                if (i >= prompts.size()) return;
                try {
                    out[i] = backend.complete(prompts[i]);
                } catch (const std::exception& e) {
                    errors[i] = e.what();
                }
            }
        });
    }
    for (auto& w : workers) w.join();
    for (size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty()) throw IoError("completion " + std::to_string(i) + " failed: " + errors[i]);
    return out;
}

// Narration spans for the "w/ parser" timestamp ablation: each narration
// owns [its start, next narration's start).
std::vector<std::pair<TimeWindow, std::string>> narration_spans(const NarratedVideo& v) {
    std::vector<std::pair<TimeWindow, std::string>> spans;
    for (size_t i = 0; i < v.narrations.size(); ++i) {
        const int start = v.narrations[i].t.seconds;
        const int end = i + 1 < v.narrations.size() ? v.narrations[i + 1].t.seconds : v.duration;
        if (start < end) spans.emplace_back(make_window(start, end), v.narrations[i].text);
    }
    return spans;
}

VideoSummary reassign_windows_from_narrations(const VideoSummary& s, const NarratedVideo& v) {
    const auto spans = narration_spans(v);
    if (spans.empty()) return s;
    VideoSummary out = s;
    for (auto& step : out.steps) {
        const auto step_emb = mine::embed_text("step", step.text);
        double best = -2.0;
        TimeWindow best_win = step.window;
        for (const auto& [win, text] : spans) {
            const double c = mine::cosine(step_emb, mine::embed_text("narr", text));
            if (c > best) {
                best = c;
                best_win = win;
            }
        }
        step.window = best_win;
    }
    return out;
}

struct SummarizeOutput {
    std::vector<VideoSummary> summaries;
    std::vector<parse::RejectionReport> rejects;
    StageStats stats;
};

SummarizeOutput run_summarize(const world::World& w, llm::ChatBackend& backend,
                              const std::string& split, int max_inflight,
                              const std::string& timestamps_mode) {
    std::vector<const NarratedVideo*> targets;
    for (const auto& v : w.videos) {
        if (split == "train" && !w.train_videos.count(v.id)) continue;
        targets.push_back(&v);
    }
    std::vector<std::vector<llm::ChatMessage>> prompts;
    prompts.reserve(targets.size());
    for (const auto* v : targets) prompts.push_back(llm::build_summary_prompt(*v));
    const auto completions = complete_all(backend, prompts, max_inflight);

    SummarizeOutput out;
    for (size_t i = 0; i < targets.size(); ++i) {
        ++out.stats.attempted;
        auto parsed = parse::parse_summary(completions[i], targets[i]->id);
        if (auto* rej = std::get_if<parse::RejectionReport>(&parsed)) {
            out.rejects.push_back(*rej);
            ++out.stats.reasons[parse::reject_reason_name(rej->reason)];
            continue;
        }
        VideoSummary s = std::get<VideoSummary>(std::move(parsed));
        if (timestamps_mode == "parser") s = reassign_windows_from_narrations(s, *targets[i]);
        if (auto rej = parse::validate_summary(s, targets[i]->duration)) {
            out.rejects.push_back(*rej);
            ++out.stats.reasons[parse::reject_reason_name(rej->reason)];
            continue;
        }
        ++out.stats.accepted;
        out.summaries.push_back(std::move(s));
    }
    return out;
}

struct DetourOutput {
    std::vector<DetourTuple> tuples;
    std::vector<parse::RejectionReport> rejects;
    StageStats stats;
};

DetourOutput run_gen_detours(const world::World& w, llm::ChatBackend& backend,
                             const std::vector<VideoSummary>& summaries,
                             const std::vector<mine::MinedPair>& pairs, int max_inflight,
                             const std::string& timestamps_mode) {
    std::map<std::string, const VideoSummary*> by_id;
    for (const auto& s : summaries) by_id[s.video_id] = &s;

    // both directions of every mined pair
    std::vector<std::pair<std::string, std::string>> directed;
    for (const auto& p : pairs) {
        if (!by_id.count(p.id_a) || !by_id.count(p.id_b)) continue;
        directed.emplace_back(p.id_a, p.id_b);
        directed.emplace_back(p.id_b, p.id_a);
    }
    std::vector<std::vector<llm::ChatMessage>> prompts;
    prompts.reserve(directed.size());
    for (const auto& [a, b] : directed)
        prompts.push_back(llm::build_detour_prompt(w.oracle_summary(a), w.oracle_summary(b)));
    const auto completions = complete_all(backend, prompts, max_inflight);

    DetourOutput out;
    for (size_t i = 0; i < directed.size(); ++i) {
        const auto& [src_id, det_id] = directed[i];
        const std::string pair_id = src_id + ":" + det_id;
        ++out.stats.attempted;
        auto parsed = parse::parse_detour(completions[i], pair_id);
        if (auto* rej = std::get_if<parse::RejectionReport>(&parsed)) {
            out.rejects.push_back(*rej);
            ++out.stats.reasons[parse::reject_reason_name(rej->reason)];
            continue;
        }
        const auto& d = std::get<parse::ParsedDetour>(parsed);
        DetourTuple t;
        t.source_id = src_id;
        t.detour_id = det_id;
        t.t_s = d.t_s;
        t.window = d.window;
        t.query = d.query;
        if (timestamps_mode == "parser") {
            // timestamps come from summary-step similarity, not the LLM
            const auto q_emb = mine::embed_text("q", t.query);
            auto best_step = [&](const VideoSummary& s) {
                size_t best = 0;
                double best_c = -2.0;
                for (size_t k = 0; k < s.steps.size(); ++k) {
                    const double c = mine::cosine(q_emb, mine::embed_text("s", s.steps[k].text));
                    if (c > best_c) {
                        best_c = c;
                        best = k;
                    }
                }
                return s.steps[best].window;
            };
            t.t_s = best_step(*by_id.at(src_id)).start;
            t.window = best_step(*by_id.at(det_id));
        }
        const auto rej = parse::validate_detour(t, w.video(src_id).duration, w.video(det_id).duration);
        if (rej) {
            out.rejects.push_back(*rej);
            ++out.stats.reasons[parse::reject_reason_name(rej->reason)];
            continue;
        }
        ++out.stats.accepted;
        out.tuples.push_back(std::move(t));
    }
    return out;
}

void write_summaries(const std::filesystem::path& dir, const SummarizeOutput& out) {
    std::vector<json> recs;
    for (const auto& s : out.summaries) recs.push_back(summary_to_json(s));
    write_jsonl(dir / "summaries.jsonl", recs);
    std::vector<json> rej;
    for (const auto& r : out.rejects) rej.push_back(parse::reject_to_json(r));
    write_jsonl(dir / "rejects_summaries.jsonl", rej);
}

void write_detours(const std::filesystem::path& dir, const DetourOutput& out) {
    std::vector<json> recs;
    for (const auto& t : out.tuples) recs.push_back(tuple_to_json(t));
    write_jsonl(dir / "detours.jsonl", recs);
    std::vector<json> rej;
    for (const auto& r : out.rejects) rej.push_back(parse::reject_to_json(r));
    write_jsonl(dir / "rejects_detours.jsonl", rej);
}

std::vector<VideoSummary> load_summaries(const std::filesystem::path& path) {
    std::vector<VideoSummary> out;
    for (const auto& j : read_jsonl(path)) out.push_back(summary_from_json(j));
    return out;
}

model::ModelConfig model_config_for(const json& cfg, const world::World& w, int vocab_size) {
    json mj = cfg.value("model", json::object());
    model::ModelConfig mc = model::ModelConfig::from_json(mj);
    mc.feature_dim = w.cfg.feature_dim;
    mc.vocab_size = vocab_size;
    mc.validate();
    return mc;
}

} // namespace

uint64_t config_hash(const json& cfg) {
    return fnv1a64(cfg.dump());
}

void write_manifest(const std::filesystem::path& dir, const std::string& command, const json& cfg,
                    const std::string& started, const std::string& finished) {
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(config_hash(cfg)));
    uint64_t seed = 0;
    if (cfg.contains("world") && cfg.at("world").is_object())
        seed = cfg.at("world").value("seed", 0);
    else if (cfg.contains("train") && cfg.at("train").is_object())
        seed = cfg.at("train").value("seed", 0);
    else if (cfg.contains("seed") && cfg.at("seed").is_number())
        seed = cfg.at("seed").get<uint64_t>();
    const json manifest{{"command", command},
                        {"config", cfg},
                        {"config_hash", hash},
                        {"seed", seed},
                        {"tool_version", kToolVersion},
                        {"started", started},
                        {"finished", finished}};
    std::filesystem::create_directories(dir);
    write_text_file(dir / ("manifest_" + command + ".json"), manifest.dump(2) + "\n");
}

void cmd_gen_world(const json& cfg) {
    const auto started = now_utc();
    const auto out = required_string(cfg, "out");
    const world::WorldConfig wc = world::WorldConfig::from_json(cfg.value("world", json::object()));
    wc.validate();
    const world::World w = world::gen_world(wc);
    world::save_world(w, out);
    write_manifest(out, "gen-world", cfg, started, now_utc());
}

void cmd_summarize(const json& cfg) {
    const auto started = now_utc();
    const auto world_dir = required_string(cfg, "world");
    const auto out = required_string(cfg, "out");
    require_exists(world_dir, "world");
    const std::string split = cfg.value("split", "train");
    if (split != "train" && split != "all")
        throw ConfigError("split", "must be 'train' or 'all'");
    const world::World w = world::load_world(world_dir);
    auto backend = llm::make_backend(backend_config(cfg), &w);
    const auto result =
        run_summarize(w, *backend, split, cfg.value("max_inflight", 1), cfg.value("timestamps", "llm"));
    std::filesystem::create_directories(out);
    write_summaries(out, result);
    write_text_file(std::filesystem::path(out) / "stats.json",
                    json{{"summarize", result.stats.to_json()}}.dump(2) + "\n");
    write_manifest(out, "summarize", cfg, started, now_utc());
}

void cmd_mine_pairs(const json& cfg) {
    const auto started = now_utc();
    const auto summaries_path = required_string(cfg, "summaries");
    const auto out = required_string(cfg, "out");
    require_exists(summaries_path, "summaries");
    const double threshold = cfg.value("threshold", mine::kDefaultSimilarityThreshold);
    const auto summaries = load_summaries(summaries_path);
    std::vector<mine::SummaryEmbedding> embs;
    embs.reserve(summaries.size());
    for (const auto& s : summaries) embs.push_back(mine::embed_summary(s));
    if (cfg.contains("cache")) mine::save_embeddings(cfg.at("cache").get<std::string>(), embs);
    const auto pairs = mine::mine_pairs(embs, threshold, cfg.value("max_pairs_per_video", 0));
    std::filesystem::create_directories(std::filesystem::path(out).parent_path());
    std::vector<json> recs;
    for (const auto& p : pairs)
        recs.push_back({{"id_a", p.id_a}, {"id_b", p.id_b}, {"similarity", p.similarity}});
    write_jsonl(out, recs);
    write_manifest(std::filesystem::path(out).parent_path(), "mine-pairs", cfg, started, now_utc());
}

void cmd_gen_detours(const json& cfg) {
    const auto started = now_utc();
    const auto world_dir = required_string(cfg, "world");
    const auto summaries_path = required_string(cfg, "summaries");
    const auto pairs_path = required_string(cfg, "pairs");
    const auto out = required_string(cfg, "out");
    require_exists(world_dir, "world");
    require_exists(summaries_path, "summaries");
    require_exists(pairs_path, "pairs");
    const world::World w = world::load_world(world_dir);
    auto backend = llm::make_backend(backend_config(cfg), &w);
    const auto summaries = load_summaries(summaries_path);
    std::vector<mine::MinedPair> pairs;
    for (const auto& j : read_jsonl(pairs_path))
        pairs.push_back({j.at("id_a").get<std::string>(), j.at("id_b").get<std::string>(),
                         j.at("similarity").get<double>()});
    const auto result = run_gen_detours(w, *backend, summaries, pairs,
                                        cfg.value("max_inflight", 1), cfg.value("timestamps", "llm"));
    std::filesystem::create_directories(out);
    write_detours(out, result);
    write_text_file(std::filesystem::path(out) / "stats.json",
                    json{{"gen_detours", result.stats.to_json()}}.dump(2) + "\n");
    write_manifest(out, "gen-detours", cfg, started, now_utc());
}

void cmd_curate(const json& cfg) {
    const auto started = now_utc();
    const auto world_dir = required_string(cfg, "world");
    const auto out_dir = std::filesystem::path(required_string(cfg, "out"));
    require_exists(world_dir, "world");
    const std::string split = cfg.value("split", "train");
    if (split != "train" && split != "all")
        throw ConfigError("split", "must be 'train' or 'all'");
    const std::string timestamps = cfg.value("timestamps", "llm");
    if (timestamps != "llm" && timestamps != "parser")
        throw ConfigError("timestamps", "must be 'llm' or 'parser'");

    const world::World w = world::load_world(world_dir);
    auto backend = llm::make_backend(backend_config(cfg), &w);
    const int inflight = cfg.value("max_inflight", 1);

    const auto summarized = run_summarize(w, *backend, split, inflight, timestamps);
    std::vector<mine::SummaryEmbedding> embs;
    for (const auto& s : summarized.summaries) embs.push_back(mine::embed_summary(s));
    const auto pairs = mine::mine_pairs(embs, cfg.value("threshold", mine::kDefaultSimilarityThreshold),
                                        cfg.value("max_pairs_per_video", 0));
    const auto detoured =
        run_gen_detours(w, *backend, summarized.summaries, pairs, inflight, timestamps);

    std::filesystem::create_directories(out_dir);
    write_summaries(out_dir, summarized);
    std::vector<json> pair_recs;
    for (const auto& p : pairs)
        pair_recs.push_back({{"id_a", p.id_a}, {"id_b", p.id_b}, {"similarity", p.similarity}});
    write_jsonl(out_dir / "pairs.jsonl", pair_recs);
    write_detours(out_dir, detoured);
    write_text_file(out_dir / "stats.json",
                    json{{"summarize", summarized.stats.to_json()},
                         {"pairs", static_cast<int>(pairs.size())},
                         {"gen_detours", detoured.stats.to_json()}}
                            .dump(2) +
                        "\n");
    write_manifest(out_dir, "curate", cfg, started, now_utc());
}

void cmd_train(const json& cfg) {
    const auto started = now_utc();
    const auto world_dir = required_string(cfg, "world");
    const auto detours_path = required_string(cfg, "detours");
    const auto out_dir = std::filesystem::path(required_string(cfg, "out"));
    require_exists(world_dir, "world");
    require_exists(detours_path, "detours");
    const train::TrainConfig tc = train::TrainConfig::from_json(cfg.value("train", json::object()));

    const world::World w = world::load_world(world_dir);
    std::vector<const NarratedVideo*> train_vids;
    for (const auto& v : w.videos)
        if (w.train_videos.count(v.id)) train_vids.push_back(&v);
    const train::Corpus corpus = train::Corpus::from_videos(train_vids);

    std::vector<DetourTuple> tuples;
    int dropped = 0;
    for (const auto& j : read_jsonl(detours_path)) {
        DetourTuple t = tuple_from_json(j);
        if (!w.train_videos.count(t.source_id) || !w.train_videos.count(t.detour_id)) {
            ++dropped;
            continue;
        }
        tuples.push_back(std::move(t));
    }
    if (tuples.empty()) throw ConfigError("detours", "no tuples fall inside the training split");

    std::vector<std::string> texts;
    for (const auto* v : train_vids)
        for (const auto& n : v->narrations) texts.push_back(n.text);
    for (const auto& t : tuples) texts.push_back(t.query);
    const model::Vocab vocab = model::Vocab::build(texts);

    const model::ModelConfig mc = model_config_for(cfg, w, vocab.size());
    const uint64_t model_seed = cfg.value("model_seed", tc.seed);
    auto m = model::DetourModel<float>::init(mc, model_seed);

    std::optional<std::filesystem::path> resume;
    if (cfg.contains("resume")) resume = cfg.at("resume").get<std::string>();

    const auto result = train::train_model(m, vocab, tuples, corpus, tc, out_dir, resume);
    write_text_file(out_dir / "train_summary.json",
                    json{{"epochs", result.epoch_losses.size()},
                         {"final_loss", result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back()},
                         {"final_checkpoint", result.final_checkpoint.string()},
                         {"tuples", tuples.size()},
                         {"tuples_dropped_outside_split", dropped}}
                            .dump(2) +
                        "\n");
    write_manifest(out_dir, "train", cfg, started, now_utc());
}

void cmd_eval(const json& cfg) {
    const auto started = now_utc();
    const auto world_dir = required_string(cfg, "world");
    const auto out_dir = std::filesystem::path(required_string(cfg, "out"));
    require_exists(world_dir, "world");
    if (!cfg.contains("checkpoint_retrieval") && !cfg.contains("checkpoint_localization"))
        throw ConfigError("checkpoint", "need checkpoint_retrieval and/or checkpoint_localization");

    const world::World w = world::load_world(world_dir);

    std::optional<std::pair<model::DetourModel<float>, model::Vocab>> retr, loc;
    if (cfg.contains("checkpoint_retrieval")) {
        const auto p = cfg.at("checkpoint_retrieval").get<std::string>();
        require_exists(p, "checkpoint_retrieval");
        retr = model::load_model(p);
    }
    if (cfg.contains("checkpoint_localization")) {
        const auto p = cfg.at("checkpoint_localization").get<std::string>();
        require_exists(p, "checkpoint_localization");
        loc = model::load_model(p);
    }

    std::map<std::string, VideoSummary> summaries;
    const json bj = cfg.value("bench", json::object());
    bench::BenchmarkConfig bc;
    if (bj.contains("recall_ks")) bc.recall_ks = bj.at("recall_ks").get<std::vector<int>>();
    if (bj.contains("iou_thresholds"))
        bc.iou_thresholds = bj.at("iou_thresholds").get<std::vector<double>>();
    bc.max_tuples_per_split = bj.value("max_tuples_per_split", 0);
    bc.run_baselines = bj.value("baselines", true);
    if (bj.contains("inputs")) {
        bc.input_combos.clear();
        for (const auto& s : bj.at("inputs")) {
            const std::string name = s.get<std::string>();
            if (name == "both") bc.input_combos.push_back(bench::Inputs::both);
            else if (name == "query_only") bc.input_combos.push_back(bench::Inputs::query_only);
            else if (name == "source_only") bc.input_combos.push_back(bench::Inputs::source_only);
            else throw ConfigError("bench.inputs", "unknown input combo: " + name);
        }
    }
    if (cfg.contains("summaries")) {
        const auto p = cfg.at("summaries").get<std::string>();
        require_exists(p, "summaries");
        for (auto& s : load_summaries(p)) summaries[s.video_id] = std::move(s);
    }

    const auto tuples = bench::test_tuples_of(w);
    const auto report = bench::run_benchmark(
        w, tuples, w.train_videos, retr ? &retr->first : nullptr, retr ? &retr->second : nullptr,
        loc ? &loc->first : nullptr, loc ? &loc->second : nullptr,
        summaries.empty() ? nullptr : &summaries, bc);

    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "report.csv", report.to_csv());
    write_text_file(out_dir / "report.json", report.to_json().dump(2) + "\n");
    write_manifest(out_dir, "eval", cfg, started, now_utc());
}

double cmd_gradcheck(const json& cfg) {
    const uint64_t seed = cfg.value("seed", 0);
    const double eps = cfg.value("eps", 1e-5);
    std::vector<std::pair<std::string, double>> results;

    auto check_unary = [&](const std::string& name,
                           const std::function<tad::Var<double>(tad::Tape<double>&,
                                                                const tad::Var<double>&)>& op,
                           std::vector<int> shape) {
        Rng rng(seed ^ fnv1a64(name));
        auto x = tad::make_leaf(tad::Tensor<double>::randn(shape, rng), true);
        std::shared_ptr<tad::Node<double>> weights;
        auto builder = [&](tad::Tape<double>& tape) {
            auto y = op(tape, x);
            if (!weights) {
                Rng wrng(seed ^ fnv1a64(name + "#w"));
                weights = tad::make_leaf(tad::Tensor<double>::randn(y->value.shape, wrng), false);
            }
            return tad::sum_all(tape, tad::mul(tape, y, weights));
        };
        results.emplace_back(name, tad::grad_check(builder, {{name, x}}, eps, 96, seed).max_rel_err);
    };

    check_unary("gelu", [](auto& t, const auto& x) { return tad::gelu(t, x); }, {5, 6});
    check_unary("softmax", [](auto& t, const auto& x) { return tad::softmax(t, x); }, {5, 6});
    check_unary("layer_norm", [](auto& t, const auto& x) { return tad::layer_norm(t, x); }, {5, 6});
    check_unary("transpose", [](auto& t, const auto& x) { return tad::transpose(t, x); }, {4, 7});
    check_unary("reshape", [](auto& t, const auto& x) { return tad::reshape(t, x, {7, 4}); }, {4, 7});
    check_unary("slice_rows", [](auto& t, const auto& x) { return tad::slice(t, x, 0, 1, 4); },
                {6, 5});
    check_unary("slice_cols", [](auto& t, const auto& x) { return tad::slice(t, x, 1, 2, 5); },
                {6, 5});

    {
        Rng rng(seed ^ 11);
        auto a = tad::make_leaf(tad::Tensor<double>::randn({4, 5}, rng), true);
        auto b = tad::make_leaf(tad::Tensor<double>::randn({5, 6}, rng), true);
        auto builder = [&](tad::Tape<double>& t) {
            auto y = tad::matmul(t, a, b);
            return tad::sum_all(t, tad::mul(t, y, y));
        };
        results.emplace_back("matmul",
                             tad::grad_check(builder, {{"a", a}, {"b", b}}, eps, 96, seed).max_rel_err);
    }
    {
        Rng rng(seed ^ 12);
        auto a = tad::make_leaf(tad::Tensor<double>::randn({4, 5}, rng), true);
        auto bias = tad::make_leaf(tad::Tensor<double>::randn({5}, rng), true);
        auto builder = [&](tad::Tape<double>& t) {
            auto y = tad::mul(t, tad::add(t, a, bias), a);
            return tad::sum_all(t, y);
        };
        results.emplace_back(
            "add_mul_broadcast",
            tad::grad_check(builder, {{"a", a}, {"bias", bias}}, eps, 96, seed).max_rel_err);
    }
    {
        Rng rng(seed ^ 13);
        auto table = tad::make_leaf(tad::Tensor<double>::randn({9, 4}, rng), true);
        auto builder = [&](tad::Tape<double>& t) {
            auto y = tad::embedding_lookup(t, table, {0, 3, 3, 8});
            return tad::sum_all(t, tad::mul(t, y, y));
        };
        results.emplace_back("embedding_lookup",
                             tad::grad_check(builder, {{"table", table}}, eps, 96, seed).max_rel_err);
    }
    {
        Rng rng(seed ^ 14);
        auto p0 = tad::make_leaf(tad::Tensor<double>::randn({3, 4}, rng), true);
        auto p1 = tad::make_leaf(tad::Tensor<double>::randn({2, 4}, rng), true);
        auto builder = [&](tad::Tape<double>& t) {
            auto y = tad::concat(t, {p0, p1});
            return tad::sum_all(t, tad::mul(t, y, y));
        };
        results.emplace_back(
            "concat", tad::grad_check(builder, {{"p0", p0}, {"p1", p1}}, eps, 96, seed).max_rel_err);
    }
    {
        Rng rng(seed ^ 15);
        auto a = tad::make_leaf(tad::Tensor<double>::randn({4, 4}, rng), true);
        tad::Tensor<double> mask({4, 4});
        for (int i = 0; i < 4; ++i) mask.at(i, (i + 1) % 4) = 1.0;
        auto builder = [&](tad::Tape<double>& t) {
            auto y = tad::masked_fill(t, a, mask, -3.0);
            return tad::sum_all(t, tad::mul(t, y, y));
        };
        results.emplace_back("masked_fill",
                             tad::grad_check(builder, {{"a", a}}, eps, 96, seed).max_rel_err);
    }
    for (const bool causal : {true, false}) {
        Rng rng(seed ^ (causal ? 16 : 17));
        auto q = tad::make_leaf(tad::Tensor<double>::randn({5, 8}, rng), true);
        auto k = tad::make_leaf(tad::Tensor<double>::randn({5, 8}, rng), true);
        auto v = tad::make_leaf(tad::Tensor<double>::randn({5, 8}, rng), true);
        auto builder = [&](tad::Tape<double>& t) {
            auto y = tad::multi_head_attention(t, q, k, v, 2, causal);
            return tad::sum_all(t, tad::mul(t, y, y));
        };
        results.emplace_back(causal ? "multi_head_attention_causal" : "multi_head_attention",
                             tad::grad_check(builder, {{"q", q}, {"k", k}, {"v", v}}, eps, 128, seed)
                                 .max_rel_err);
    }
    {
        Rng rng(seed ^ 18);
        auto z = tad::make_leaf(tad::Tensor<double>::randn({1}, rng), true);
        for (const int label : {0, 1}) {
            auto builder = [&](tad::Tape<double>& t) { return tad::bce_with_logits(t, z, label); };
            results.emplace_back("bce_with_logits_label" + std::to_string(label),
                                 tad::grad_check(builder, {{"z", z}}, eps, 8, seed).max_rel_err);
        }
    }
    {
        Rng rng(seed ^ 19);
        auto logits = tad::make_leaf(tad::Tensor<double>::randn({9}, rng), true);
        auto builder = [&](tad::Tape<double>& t) { return tad::cross_entropy(t, logits, 4); };
        results.emplace_back("cross_entropy",
                             tad::grad_check(builder, {{"logits", logits}}, eps, 16, seed).max_rel_err);
    }

    // full losses on a tiny f64 model over a small generated world
    world::WorldConfig wc;
    wc.n_tasks = 2;
    wc.videos_per_task = 2;
    wc.feature_dim = 8;
    wc.noise_sigma = 0.2;
    wc.seed = seed + 1;
    wc.novel_task_fraction = 0.0;
    const world::World w = world::gen_world(wc);
    const world::GtTuple* g = nullptr;
    for (const auto& cand : w.gt)
        if (!g) g = &cand;
    if (!g) throw IoError("gradcheck world has no tuples");

    std::vector<std::string> texts = {g->tuple.query};
    for (const auto& v : w.videos)
        for (const auto& n : v.narrations) texts.push_back(n.text);
    const model::Vocab vocab = model::Vocab::build(texts);
    model::ModelConfig mc;
    mc.d_model = 8;
    mc.n_heads = 2;
    mc.n_layers = 1;
    mc.ffn_dim = 16;
    mc.max_seq = 128;
    mc.feature_dim = 8;
    mc.vocab_size = vocab.size();
    mc.retrieval_head = model::HeadConfig{0, 1, 2, 16};
    auto tiny = model::DetourModel<double>::init(mc, seed + 2);

    const auto& src = w.video(g->tuple.source_id);
    const auto& det = w.video(g->tuple.detour_id);
    const auto qids = vocab.tokenize(g->tuple.query);

    auto retr_builder = [&](tad::Tape<double>& t) {
        return train::retrieval_loss_for(t, tiny, src.features, g->tuple.t_s.seconds, qids,
                                         det.features, 1);
    };
    results.emplace_back(
        "full_retrieval_loss",
        tad::grad_check(retr_builder, tiny.named_params(), eps, 24, seed).max_rel_err);

    auto loc_builder = [&](tad::Tape<double>& t) {
        return train::localization_loss_for(t, tiny, src.features, g->tuple.t_s.seconds, qids,
                                            det.features, g->tuple.window);
    };
    results.emplace_back(
        "full_localization_loss",
        tad::grad_check(loc_builder, tiny.named_params(), eps, 24, seed).max_rel_err);

    double max_err = 0.0;
    json breakdown = json::object();
    for (const auto& [name, err] : results) {
        breakdown[name] = err;
        max_err = std::max(max_err, err);
    }
    if (cfg.contains("out")) {
        const std::filesystem::path out = cfg.at("out").get<std::string>();
        std::filesystem::create_directories(out.parent_path().empty() ? "." : out.parent_path());
        write_text_file(out, json{{"max_rel_err", max_err}, {"checks", breakdown}}.dump(2) + "\n");
    }
    return max_err;
}

std::string cmd_report(const json& cfg) {
    if (!cfg.contains("inputs") || !cfg.at("inputs").is_array() || cfg.at("inputs").empty())
        throw ConfigError("inputs", "need at least one report.json path");
    std::vector<bench::ReportRow> rows;
    std::vector<std::string> runs;
    for (const auto& p : cfg.at("inputs")) {
        const std::filesystem::path path = p.get<std::string>();
        require_exists(path, "inputs");
        const json j = json::parse(read_text_file(path));
        const std::string run = path.parent_path().filename().string();
        runs.push_back(run);
        for (const auto& r : j.at("rows"))
            rows.push_back({(runs.size() > 1 ? run + "/" : "") + r.at("method").get<std::string>(),
                            r.at("inputs").get<std::string>(), r.at("split").get<std::string>(),
                            r.at("metric").get<std::string>(), r.at("value").get<double>()});
    }

    std::ostringstream os;
    os << std::left << std::setw(28) << "method" << std::setw(14) << "inputs" << std::setw(10)
       << "split" << std::setw(18) << "metric" << "value\n";
    os << std::string(78, '-') << '\n';
    char buf[32];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.4g", r.value);
        os << std::left << std::setw(28) << r.method << std::setw(14) << r.inputs << std::setw(10)
           << r.split << std::setw(18) << r.metric << buf << '\n';
    }
    if (cfg.contains("out")) {
        bench::Report merged;
        merged.rows = rows;
        write_text_file(cfg.at("out").get<std::string>(), merged.to_csv());
    }
    return os.str();
}

} // namespace detours::pipeline
