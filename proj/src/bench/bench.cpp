#include "bench/bench.hpp"

#include "core/errors.hpp"
#include "train/loss.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace detours::bench {

using nlohmann::json;

RankResult rank_candidates(const std::function<double(const std::string&)>& score,
                           const std::string& gt_id, const std::vector<std::string>& candidates,
                           const std::string& tuple_id) {
    bool has_gt = false;
    for (const auto& c : candidates)
        if (c == gt_id) has_gt = true;
    if (!has_gt) throw MissingGroundTruth("candidates do not include " + gt_id);

    const double gt_score = score(gt_id);
    int rank = 1;
    for (const auto& c : candidates) {
        if (c == gt_id) continue;
        const double s = score(c);
        if (s > gt_score || (s == gt_score && c < gt_id)) ++rank;
    }
    return {tuple_id, rank, static_cast<int>(candidates.size())};
}

double recall_at_k(const std::vector<RankResult>& results, int k) {
    if (results.empty()) throw EmptyResults("recall_at_k over no results");
    int hit = 0;
    for (const auto& r : results)
        if (r.rank <= k) ++hit;
    return static_cast<double>(hit) / static_cast<double>(results.size());
}

int median_rank(const std::vector<RankResult>& results) {
    if (results.empty()) throw EmptyResults("median_rank over no results");
    std::vector<int> ranks;
    ranks.reserve(results.size());
    for (const auto& r : results) ranks.push_back(r.rank);
    std::sort(ranks.begin(), ranks.end());
    return ranks[(ranks.size() - 1) / 2];
}

LocRecall loc_recall(const std::vector<LocResult>& results,
                     const std::vector<double>& thresholds) {
    if (results.empty()) throw EmptyResults("loc_recall over no results");
    LocRecall out;
    auto r1_at = [&](double tau) {
        int hit = 0;
        for (const auto& r : results)
            if (r.iou >= tau) ++hit;
        return static_cast<double>(hit) / static_cast<double>(results.size());
    };
    for (double tau : thresholds) out.at_threshold.emplace_back(tau, r1_at(tau));
    double sweep = 0.0;
    int steps = 0;
    for (int i = 1; i <= 19; ++i) {
        sweep += r1_at(0.05 * i);
        ++steps;
    }
    out.mean_r1 = sweep / steps;
    double iou_sum = 0.0;
    for (const auto& r : results) iou_sum += r.iou;
    out.mean_iou = iou_sum / static_cast<double>(results.size());
    return out;
}

const char* baseline_name(BaselineName b) {
    switch (b) {
        case BaselineName::text_only: return "text_only";
        case BaselineName::mean_pool: return "mean_pool";
        case BaselineName::weighted_pool: return "weighted_pool";
    }
    return "?";
}

const char* inputs_name(Inputs i) {
    switch (i) {
        case Inputs::source_only: return "source_only";
        case Inputs::query_only: return "query_only";
        case Inputs::both: return "both";
    }
    return "?";
}

void BaselineVariant::validate() const {
    if (name == BaselineName::weighted_pool && inputs == Inputs::source_only)
        throw ConfigError("baseline.inputs",
                          "weighted_pool has no source_only variant: query features are needed "
                          "to weight the frames");
}

namespace {

std::vector<double> normalized(std::vector<double> v) {
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(std::max(n, 1e-12));
    for (auto& x : v) x /= n;
    return v;
}

std::vector<double> weighted_pool_embed(const NarratedVideo& v, const std::vector<double>& qdir) {
    // frame weights: softmax over per-frame cosine with the query vector
    const int d = v.features.cols;
    std::vector<double> sims(static_cast<size_t>(v.duration));
    for (int t = 0; t < v.duration; ++t) {
        const float* row = v.features.row(t);
        double dot = 0.0, n = 0.0;
        for (int c = 0; c < d; ++c) {
            dot += qdir[static_cast<size_t>(c)] * row[c];
            n += static_cast<double>(row[c]) * row[c];
        }
        sims[static_cast<size_t>(t)] = dot / std::max(std::sqrt(n), 1e-12);
    }
    const double mx = *std::max_element(sims.begin(), sims.end());
    double z = 0.0;
    for (auto& s : sims) {
        s = std::exp(s - mx);
        z += s;
    }
    std::vector<double> acc(static_cast<size_t>(d), 0.0);
    for (int t = 0; t < v.duration; ++t) {
        const double w = sims[static_cast<size_t>(t)] / z;
        const float* row = v.features.row(t);
        for (int c = 0; c < d; ++c) acc[static_cast<size_t>(c)] += w * row[c];
    }
    return normalized(std::move(acc));
}

} // namespace

std::function<double(const std::string&)>
baseline_scorer(const BaselineVariant& variant, const world::World& w,
                const world::AlignedEmbedder& emb, const world::GtTuple& tuple,
                const std::map<std::string, VideoSummary>* summaries) {
    variant.validate();
    const auto& src = w.video(tuple.tuple.source_id);

    if (variant.name == BaselineName::text_only) {
        if (!summaries) throw ConfigError("baseline.summaries", "text_only needs summaries");
        auto text_embed = [&, summaries](const std::string& id) {
            const auto it = summaries->find(id);
            if (it == summaries->end())
                throw MissingGroundTruth("no summary for video " + id);
            std::string text = it->second.recipe;
            for (const auto& st : it->second.steps) text += " " + st.text;
            return emb.embed_query(text);
        };
        std::vector<double> ref;
        switch (variant.inputs) {
            case Inputs::query_only: ref = emb.embed_query(tuple.tuple.query); break;
            case Inputs::source_only: ref = text_embed(tuple.tuple.source_id); break;
            case Inputs::both: {
                const auto a = text_embed(tuple.tuple.source_id);
                const auto b = emb.embed_query(tuple.tuple.query);
                ref.resize(a.size());
                for (size_t i = 0; i < a.size(); ++i) ref[i] = 0.5 * (a[i] + b[i]);
                break;
            }
        }
        return [text_embed, ref](const std::string& id) {
            return world::cosine(text_embed(id), ref);
        };
    }

    // visual baselines share the reference-building rule
    std::vector<double> ref;
    const auto qvec = [&]() -> std::vector<double> {
        return emb.embed_query(tuple.tuple.query);
    };
    switch (variant.inputs) {
        case Inputs::source_only: ref = emb.embed_video(src); break;
        case Inputs::query_only: ref = qvec(); break;
        case Inputs::both: {
            const auto a = emb.embed_video(src);
            const auto b = qvec();
            ref.resize(a.size());
            for (size_t i = 0; i < a.size(); ++i) ref[i] = 0.5 * (a[i] + b[i]);
            break;
        }
    }

    if (variant.name == BaselineName::mean_pool) {
        return [&w, &emb, ref](const std::string& id) {
            return world::cosine(emb.embed_video(w.video(id)), ref);
        };
    }
    // weighted_pool: candidate embedding re-weighted by query similarity
    const auto qdir = qvec();
    return [&w, qdir, ref](const std::string& id) {
        return world::cosine(weighted_pool_embed(w.video(id), qdir), ref);
    };
}

std::optional<double> Report::find(const std::string& method, const std::string& inputs,
                                   const std::string& split, const std::string& metric) const {
    for (const auto& r : rows)
        if (r.method == method && r.inputs == inputs && r.split == split && r.metric == metric)
            return r.value;
    return std::nullopt;
}

std::string Report::to_csv() const {
    std::ostringstream os;
    os << "method,inputs,split,metric,value\n";
    char buf[64];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%.9g", r.value);
        os << r.method << ',' << r.inputs << ',' << r.split << ',' << r.metric << ',' << buf << '\n';
    }
    return os.str();
}

json Report::to_json() const {
    json arr = json::array();
    for (const auto& r : rows)
        arr.push_back({{"method", r.method},
                       {"inputs", r.inputs},
                       {"split", r.split},
                       {"metric", r.metric},
                       {"value", r.value}});
    return json{{"rows", arr}};
}

std::vector<world::GtTuple> test_tuples_of(const world::World& w) {
    std::vector<world::GtTuple> out;
    for (const auto& g : w.gt)
        if (g.split == "test") out.push_back(g);
    return out;
}

namespace {

std::string tuple_key(const world::GtTuple& g) {
    return g.tuple.source_id + "|" + g.tuple.detour_id + "|" + std::to_string(g.tuple.t_s.seconds);
}

double model_score(const model::DetourModel<float>& m, const NarratedVideo& src, int t_s,
                   const std::vector<int>& qids, const NarratedVideo& cand, Inputs inputs) {
    tad::Tape<float> tape(false);
    const bool use_source = inputs != Inputs::query_only;
    const bool use_query = inputs != Inputs::source_only;
    auto a = m.assemble(tape, src.features, t_s, qids, cand.features, use_source, use_query);
    auto o = m.encode(tape, a);
    return static_cast<double>(m.retrieval_logit(tape, o)->value.scalar());
}

} // namespace

Report run_benchmark(const world::World& w, const std::vector<world::GtTuple>& test_tuples,
                     const std::set<std::string>& train_video_ids,
                     const model::DetourModel<float>* retrieval_model,
                     const model::Vocab* retrieval_vocab,
                     const model::DetourModel<float>* localization_model,
                     const model::Vocab* localization_vocab,
                     const std::map<std::string, VideoSummary>* summaries,
                     const BenchmarkConfig& cfg) {
    // split hygiene gate
    for (const auto& g : test_tuples) {
        if (train_video_ids.count(g.tuple.source_id))
            throw SplitLeak("test tuple uses training video " + g.tuple.source_id);
        if (train_video_ids.count(g.tuple.detour_id))
            throw SplitLeak("test tuple uses training video " + g.tuple.detour_id);
    }

    // deterministic per-split subset
    const std::set<std::string> novel(w.novel_tasks.begin(), w.novel_tasks.end());
    auto split_of = [&](const world::GtTuple& g) {
        return novel.count(g.task_id) ? std::string("novel") : std::string("common");
    };
    std::vector<world::GtTuple> tuples = test_tuples;
    std::sort(tuples.begin(), tuples.end(), [](const auto& a, const auto& b) {
        return std::make_tuple(a.tuple.source_id, a.tuple.detour_id, a.tuple.t_s.seconds) <
               std::make_tuple(b.tuple.source_id, b.tuple.detour_id, b.tuple.t_s.seconds);
    });
    if (cfg.max_tuples_per_split > 0) {
        std::map<std::string, int> kept;
        std::vector<world::GtTuple> capped;
        for (const auto& g : tuples) {
            if (kept[split_of(g)] >= cfg.max_tuples_per_split) continue;
            ++kept[split_of(g)];
            capped.push_back(g);
        }
        tuples = std::move(capped);
    }
    if (tuples.empty()) throw EmptyResults("no test tuples");

    std::vector<std::string> candidates;
    for (const auto& v : w.videos) candidates.push_back(v.id);
    std::sort(candidates.begin(), candidates.end());

    const world::AlignedEmbedder emb(w);
    Report report;

    auto emit_retrieval = [&](const std::string& method, const std::string& inputs,
                              const std::map<std::string, std::vector<RankResult>>& by_split) {
        for (const auto& [split, results] : by_split) {
            if (results.empty()) continue;
            for (int k : cfg.recall_ks)
                report.rows.push_back({method, inputs, split, "recall@" + std::to_string(k),
                                       recall_at_k(results, k)});
            report.rows.push_back(
                {method, inputs, split, "median_rank", static_cast<double>(median_rank(results))});
        }
    };

    auto collect = [&](const std::function<RankResult(const world::GtTuple&)>& ranker) {
        std::map<std::string, std::vector<RankResult>> by_split;
        for (const auto& g : tuples) {
            RankResult r = ranker(g);
            by_split["overall"].push_back(r);
            by_split[split_of(g)].push_back(r);
        }
        return by_split;
    };

    if (retrieval_model) {
        for (Inputs inputs : cfg.input_combos) {
            auto by_split = collect([&](const world::GtTuple& g) {
                const auto& src = w.video(g.tuple.source_id);
                const auto qids = retrieval_vocab->tokenize(g.tuple.query);
                return rank_candidates(
                    [&](const std::string& id) {
                        return model_score(*retrieval_model, src, g.tuple.t_s.seconds, qids,
                                           w.video(id), inputs);
                    },
                    g.tuple.detour_id, candidates, tuple_key(g));
            });
            emit_retrieval("ours", inputs_name(inputs), by_split);
        }
    }

    if (cfg.run_baselines) {
        for (BaselineName name :
             {BaselineName::text_only, BaselineName::mean_pool, BaselineName::weighted_pool}) {
            for (Inputs inputs : cfg.input_combos) {
                if (name == BaselineName::weighted_pool && inputs == Inputs::source_only)
                    continue; // excluded by construction
                if (name == BaselineName::text_only && !summaries) continue;
                const BaselineVariant variant{name, inputs};
                auto by_split = collect([&](const world::GtTuple& g) {
                    auto scorer = baseline_scorer(variant, w, emb, g, summaries);
                    return rank_candidates(scorer, g.tuple.detour_id, candidates, tuple_key(g));
                });
                emit_retrieval(baseline_name(name), inputs_name(inputs), by_split);
            }
        }
    }

    if (localization_model) {
        for (Inputs inputs : cfg.input_combos) {
            std::map<std::string, std::vector<LocResult>> by_split;
            for (const auto& g : tuples) {
                const auto& src = w.video(g.tuple.source_id);
                const auto& det = w.video(g.tuple.detour_id);
                const auto qids = localization_vocab->tokenize(g.tuple.query);
                tad::Tape<float> tape(false);
                const bool use_source = inputs != Inputs::query_only;
                const bool use_query = inputs != Inputs::source_only;
                auto a = localization_model->assemble(tape, src.features, g.tuple.t_s.seconds,
                                                      qids, det.features, use_source, use_query);
                auto o = localization_model->encode(tape, a);
                const TimeWindow pred =
                    train::predict_window(tape, *localization_model, o, a.plan);
                LocResult r{tuple_key(g), pred, g.tuple.window,
                            interval_iou(pred, g.tuple.window)};
                by_split["overall"].push_back(r);
                by_split[split_of(g)].push_back(r);
            }
            for (const auto& [split, results] : by_split) {
                if (results.empty()) continue;
                const LocRecall lr = loc_recall(results, cfg.iou_thresholds);
                for (const auto& [tau, r1] : lr.at_threshold) {
                    char name[32];
                    std::snprintf(name, sizeof(name), "recall@1_iou%.1f", tau);
                    report.rows.push_back({"ours_loc", inputs_name(inputs), split, name, r1});
                }
                report.rows.push_back({"ours_loc", inputs_name(inputs), split, "mean_recall@1", lr.mean_r1});
                report.rows.push_back({"ours_loc", inputs_name(inputs), split, "mean_iou", lr.mean_iou});
            }
        }
    }

    // tuple counts per split, for the record
    std::map<std::string, int> counts;
    for (const auto& g : tuples) {
        ++counts["overall"];
        ++counts[split_of(g)];
    }
    for (const auto& [split, n] : counts)
        report.rows.push_back({"dataset", "-", split, "tuples", static_cast<double>(n)});

    return report;
}

} // namespace detours::bench
