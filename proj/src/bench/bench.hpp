#pragma once

#include "model/model.hpp"
#include "world/world.hpp"

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace detours::bench {

class MissingGroundTruth : public std::runtime_error {
public:
    explicit MissingGroundTruth(const std::string& what) : std::runtime_error(what) {}
};

class EmptyResults : public std::runtime_error {
public:
    explicit EmptyResults(const std::string& what) : std::runtime_error(what) {}
};

class SplitLeak : public std::runtime_error {
public:
    explicit SplitLeak(const std::string& what) : std::runtime_error(what) {}
};

struct RankResult {
    std::string tuple_id;
    int rank = 0; // 1-based rank of the ground-truth detour video
    int candidate_count = 0;
};

struct LocResult {
    std::string tuple_id;
    TimeWindow predicted;
    TimeWindow gt;
    double iou = 0.0;
};

// Rank of gt among candidates under a scorer; ties break by candidate id
// so the metric is reproducible under score-preserving reorderings.
RankResult rank_candidates(const std::function<double(const std::string&)>& score,
                           const std::string& gt_id, const std::vector<std::string>& candidates,
                           const std::string& tuple_id);

double recall_at_k(const std::vector<RankResult>& results, int k);
int median_rank(const std::vector<RankResult>& results); // lower median

struct LocRecall {
    std::vector<std::pair<double, double>> at_threshold; // (tau, R@1)
    double mean_r1 = 0.0;  // mean of R@1 over tau in {0.05..0.95 step 0.05}
    double mean_iou = 0.0; // recorded separately
};

LocRecall loc_recall(const std::vector<LocResult>& results,
                     const std::vector<double>& thresholds = {0.3, 0.5, 0.7});

enum class BaselineName { text_only, mean_pool, weighted_pool };
enum class Inputs { source_only, query_only, both };

const char* baseline_name(BaselineName b);
const char* inputs_name(Inputs i);

struct BaselineVariant {
    BaselineName name = BaselineName::mean_pool;
    Inputs inputs = Inputs::both;

    void validate() const; // weighted_pool needs query features
};

// Candidate scorer for a late-fusion baseline; summaries are required by
// text_only and ignored otherwise.
std::function<double(const std::string&)>
baseline_scorer(const BaselineVariant& variant, const world::World& w,
                const world::AlignedEmbedder& emb, const world::GtTuple& tuple,
                const std::map<std::string, VideoSummary>* summaries);

struct BenchmarkConfig {
    std::vector<int> recall_ks = {1, 5, 10}; // candidate sets here are far below 3,873
    std::vector<double> iou_thresholds = {0.3, 0.5, 0.7};
    std::vector<Inputs> input_combos = {Inputs::both, Inputs::query_only, Inputs::source_only};
    int max_tuples_per_split = 0; // 0 = all
    bool run_baselines = true;
};

struct ReportRow {
    std::string method;
    std::string inputs;
    std::string split;
    std::string metric;
    double value = 0.0;
};

struct Report {
    std::vector<ReportRow> rows;

    std::optional<double> find(const std::string& method, const std::string& inputs,
                               const std::string& split, const std::string& metric) const;
    std::string to_csv() const;
    nlohmann::json to_json() const;
};

// The full protocol: retrieval ranking over every video in the world,
// localization on the ground-truth detour video, per-split (common/novel)
// and per-input-combination reporting. Throws SplitLeak when any test
// tuple touches a training video.
Report run_benchmark(const world::World& w, const std::vector<world::GtTuple>& test_tuples,
                     const std::set<std::string>& train_video_ids,
                     const model::DetourModel<float>* retrieval_model,
                     const model::Vocab* retrieval_vocab,
                     const model::DetourModel<float>* localization_model,
                     const model::Vocab* localization_vocab,
                     const std::map<std::string, VideoSummary>* summaries,
                     const BenchmarkConfig& cfg);

std::vector<world::GtTuple> test_tuples_of(const world::World& w);

} // namespace detours::bench
