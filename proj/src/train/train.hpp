#pragma once

#include "model/checkpoint.hpp"
#include "train/loss.hpp"

#include <filesystem>
#include <map>
#include <optional>

namespace detours::train {

class NoNegativeAvailable : public std::runtime_error {
public:
    explicit NoNegativeAvailable(const std::string& what) : std::runtime_error(what) {}
};

enum class NegativeKind { same_task, cross_task, none };

struct RetrievalSample {
    DetourTuple tuple;
    std::string candidate_id;
    int label = 0; // 1 iff candidate is the recorded detour video
    NegativeKind negative_kind = NegativeKind::none;
};

struct TrainConfig {
    double lr = 3e-5; // full-scale recipe default; desk runs override
    int batch_size = 16;
    int epochs = 5;
    double p_hard = 0.5; // probability a negative comes from the same task
    uint64_t seed = 0;
    std::string task = "retrieval"; // or "localization"
    double weight_decay = 0.0;

    void validate() const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j);
};

// Read-only view over the training videos; ids kept sorted so iteration
// order never depends on container internals.
struct Corpus {
    std::vector<const NarratedVideo*> videos;
    std::map<std::string, const NarratedVideo*> by_id;
    std::map<std::string, std::vector<std::string>> by_task;

    static Corpus from_videos(const std::vector<const NarratedVideo*>& vids);
    const NarratedVideo& video(const std::string& id) const;
};

// With probability p_hard a uniform same-task video (excluding the
// positive and the source), otherwise a uniform other-task video.
std::pair<std::string, NegativeKind> sample_negative(const DetourTuple& tuple,
                                                     const Corpus& corpus, double p_hard,
                                                     Rng& rng);

struct TrainResult {
    std::vector<double> epoch_losses;
    std::filesystem::path final_checkpoint;
};

// Runs the configured task's loop; writes config.json, metrics.csv and
// checkpoints/epoch_k/ under run_dir. resume_from continues an earlier
// run's trajectory exactly.
TrainResult train_model(model::DetourModel<float>& m, const model::Vocab& vocab,
                        const std::vector<DetourTuple>& tuples, const Corpus& corpus,
                        const TrainConfig& cfg, const std::filesystem::path& run_dir,
                        const std::optional<std::filesystem::path>& resume_from = std::nullopt);

} // namespace detours::train
