#include "train/train.hpp"

#include "core/errors.hpp"
#include "core/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace detours::train {

using nlohmann::json;

void TrainConfig::validate() const {
    if (lr <= 0.0) throw ConfigError("train.lr", "must be > 0");
    if (batch_size < 1) throw ConfigError("train.batch_size", "must be >= 1");
    if (epochs < 1) throw ConfigError("train.epochs", "must be >= 1");
    if (p_hard < 0.0 || p_hard > 1.0) throw ConfigError("train.p_hard", "must be in [0, 1]");
    if (task != "retrieval" && task != "localization")
        throw ConfigError("train.task", "must be 'retrieval' or 'localization'");
    if (weight_decay < 0.0) throw ConfigError("train.weight_decay", "must be >= 0");
}

json TrainConfig::to_json() const {
    return json{{"lr", lr},           {"batch_size", batch_size},
                {"epochs", epochs},   {"p_hard", p_hard},
                {"seed", seed},       {"task", task},
                {"weight_decay", weight_decay}};
}

TrainConfig TrainConfig::from_json(const json& j) {
    TrainConfig c;
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.p_hard = j.value("p_hard", c.p_hard);
    c.seed = j.value("seed", c.seed);
    c.task = j.value("task", c.task);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.validate();
    return c;
}

Corpus Corpus::from_videos(const std::vector<const NarratedVideo*>& vids) {
    Corpus c;
    c.videos = vids;
    std::sort(c.videos.begin(), c.videos.end(),
              [](const auto* a, const auto* b) { return a->id < b->id; });
    for (const auto* v : c.videos) {
        c.by_id[v->id] = v;
        c.by_task[v->task_id].push_back(v->id);
    }
    return c;
}

const NarratedVideo& Corpus::video(const std::string& id) const {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw IoError("video not in corpus: " + id);
    return *it->second;
}

std::pair<std::string, NegativeKind> sample_negative(const DetourTuple& tuple,
                                                     const Corpus& corpus, double p_hard,
                                                     Rng& rng) {
    const auto task_it = corpus.by_id.find(tuple.detour_id);
    if (task_it == corpus.by_id.end())
        throw NoNegativeAvailable("detour video not in corpus: " + tuple.detour_id);
    const std::string& task = task_it->second->task_id;

    const bool want_hard = rng.bernoulli(p_hard);
    if (want_hard) {
        std::vector<const std::string*> pool;
        for (const auto& id : corpus.by_task.at(task))
            if (id != tuple.detour_id && id != tuple.source_id) pool.push_back(&id);
        if (pool.empty())
            throw NoNegativeAvailable("no same-task alternative for " + tuple.detour_id);
        return {*pool[static_cast<size_t>(rng.uniform_int(static_cast<int>(pool.size())))],
                NegativeKind::same_task};
    }
    std::vector<const std::string*> pool;
    for (const auto* v : corpus.videos)
        if (v->task_id != task) pool.push_back(&v->id);
    if (pool.empty()) throw NoNegativeAvailable("no cross-task alternative for " + tuple.detour_id);
    return {*pool[static_cast<size_t>(rng.uniform_int(static_cast<int>(pool.size())))],
            NegativeKind::cross_task};
}

namespace {

void append_metric(std::ofstream& os, int epoch, const char* split, double loss) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%d,%s,%.9g\n", epoch, split, loss);
    os << buf;
}

} // namespace

TrainResult train_model(model::DetourModel<float>& m, const model::Vocab& vocab,
                        const std::vector<DetourTuple>& tuples, const Corpus& corpus,
                        const TrainConfig& cfg, const std::filesystem::path& run_dir,
                        const std::optional<std::filesystem::path>& resume_from) {
    cfg.validate();
    if (tuples.empty()) throw ConfigError("train.tuples", "no training tuples");
    std::filesystem::create_directories(run_dir / "checkpoints");

    const bool retrieval = cfg.task == "retrieval";
    auto params = m.params();
    tad::AdamW<float> opt(cfg.lr, cfg.weight_decay);
    Rng rng(cfg.seed ^ 0x7EA1ull);
    int start_epoch = 0;

    if (resume_from) {
        auto [restored, rvocab] = model::load_model(*resume_from);
        m = std::move(restored);
        params = m.params();
        const auto st = model::load_train_state(*resume_from, &opt, params);
        if (!st) throw IoError("no train state under " + resume_from->string());
        rng.set_state(st->rng_state);
        start_epoch = st->epoch;
    }

    write_text_file(run_dir / "config.json", cfg.to_json().dump(2) + "\n");
    const bool fresh_metrics =
        !resume_from || !std::filesystem::exists(run_dir / "metrics.csv");
    std::ofstream metrics(run_dir / "metrics.csv",
                          fresh_metrics ? std::ios::out : std::ios::app);
    if (fresh_metrics) metrics << "epoch,split,loss\n";

    // pre-tokenized queries, one per tuple
    std::vector<std::vector<int>> query_ids;
    query_ids.reserve(tuples.size());
    for (const auto& t : tuples) query_ids.push_back(vocab.tokenize(t.query));

    TrainResult result;
    std::vector<size_t> order(tuples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    struct Item {
        size_t tuple_idx;
        std::string candidate_id;
        int label;
    };

    for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        // fresh permutation per epoch so a resumed run shuffles identically
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        for (size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);

        std::vector<Item> items;
        items.reserve(retrieval ? tuples.size() * 2 : tuples.size());
        for (size_t oi : order) {
            const auto& t = tuples[oi];
            if (retrieval) {
                items.push_back({oi, t.detour_id, 1});
                auto [neg, kind] = sample_negative(t, corpus, cfg.p_hard, rng);
                (void)kind;
                items.push_back({oi, neg, 0});
            } else {
                items.push_back({oi, t.detour_id, 1});
            }
        }

        double epoch_loss = 0.0;
        size_t count = 0;
        for (size_t b = 0; b < items.size(); b += static_cast<size_t>(cfg.batch_size)) {
            const size_t e = std::min(items.size(), b + static_cast<size_t>(cfg.batch_size));
            tad::Tape<float> tape;
            tad::Var<float> total;
            for (size_t i = b; i < e; ++i) {
                const auto& it = items[i];
                const auto& t = tuples[it.tuple_idx];
                const auto& src = corpus.video(t.source_id);
                const auto& cand = corpus.video(it.candidate_id);
                tad::Var<float> loss;
                if (retrieval) {
                    loss = retrieval_loss_for(tape, m, src.features, t.t_s.seconds,
                                              query_ids[it.tuple_idx], cand.features, it.label);
                } else {
                    loss = localization_loss_for(tape, m, src.features, t.t_s.seconds,
                                                 query_ids[it.tuple_idx], cand.features, t.window);
                }
                total = total ? tad::add(tape, total, loss) : loss;
            }
            auto mean = tad::scale(tape, total, 1.0 / static_cast<double>(e - b));
            epoch_loss += static_cast<double>(mean->value.scalar()) * static_cast<double>(e - b);
            count += e - b;
            tape.backward(mean);
            opt.step(params);
            tad::zero_grad(params);
        }

        epoch_loss /= static_cast<double>(count);
        result.epoch_losses.push_back(epoch_loss);
        append_metric(metrics, epoch + 1, "train", epoch_loss);

        const auto ckpt = run_dir / "checkpoints" / ("epoch_" + std::to_string(epoch + 1));
        model::save_model(m, vocab, ckpt);
        model::save_train_state(ckpt, {epoch + 1, rng.state(), opt.step_count()}, opt);
        result.final_checkpoint = ckpt;
    }
    return result;
}

} // namespace detours::train
