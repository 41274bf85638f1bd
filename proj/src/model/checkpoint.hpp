#pragma once

#include "model/model.hpp"
#include "tad/dtck.hpp"
#include "tad/optim.hpp"

#include <filesystem>
#include <optional>

namespace detours::model {

// Checkpoint directory layout: model.dtck + vocab.json + config.json,
// optionally optim.dtck + train_state.json when saved mid-run.
struct TrainState {
    int epoch = 0;
    uint64_t rng_state = 0;
    int64_t optimizer_steps = 0;
};

void save_model(const DetourModel<float>& m, const Vocab& vocab,
                const std::filesystem::path& dir);
std::pair<DetourModel<float>, Vocab> load_model(const std::filesystem::path& dir);

void save_train_state(const std::filesystem::path& dir, const TrainState& st,
                      tad::AdamW<float>& opt);
std::optional<TrainState> load_train_state(const std::filesystem::path& dir,
                                           tad::AdamW<float>* opt,
                                           const std::vector<tad::Var<float>>& params);

} // namespace detours::model
