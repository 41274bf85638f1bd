#include "train/train.hpp"
#include "world/world.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace detours;
using namespace detours::train;

namespace {

struct Fixture {
    world::World w;
    Corpus corpus;
    std::vector<DetourTuple> train_tuples;
    model::Vocab vocab;
    model::ModelConfig mcfg;

    explicit Fixture(double sigma = 0.0, uint64_t seed = 13, int n_tasks = 4) {
        world::WorldConfig cfg;
        cfg.n_tasks = n_tasks;
        cfg.videos_per_task = 6;
        cfg.feature_dim = 8;
        cfg.noise_sigma = sigma;
        cfg.seed = seed;
        cfg.novel_task_fraction = 0.25;
        w = world::gen_world(cfg);

        std::vector<const NarratedVideo*> train_vids;
        for (const auto& v : w.videos)
            if (w.train_videos.count(v.id)) train_vids.push_back(&v);
        corpus = Corpus::from_videos(train_vids);
        std::vector<std::string> texts;
        for (const auto& g : w.gt)
            if (g.split == "train") {
                train_tuples.push_back(g.tuple);
                texts.push_back(g.tuple.query);
            }
        for (const auto* v : train_vids)
            for (const auto& n : v->narrations) texts.push_back(n.text);
        vocab = model::Vocab::build(texts);

        mcfg.d_model = 16;
        mcfg.n_heads = 2;
        mcfg.n_layers = 1;
        mcfg.ffn_dim = 32;
        mcfg.max_seq = 256;
        mcfg.feature_dim = 8;
        mcfg.vocab_size = vocab.size();
        mcfg.retrieval_head.layers = 1;
        mcfg.retrieval_head.heads = 2;
        mcfg.retrieval_head.ffn_dim = 32;
    }
};

} // namespace

TEST_SUITE_BEGIN("train");

TEST_CASE("sample_negative boundary behavior") {
    Fixture f;
    const auto& t = f.train_tuples.front();
    Rng rng(1);
    for (int i = 0; i < 50; ++i) {
        const auto [id, kind] = sample_negative(t, f.corpus, 0.0, rng);
        CHECK(kind == NegativeKind::cross_task);
        CHECK(f.corpus.video(id).task_id != f.corpus.video(t.detour_id).task_id);
        CHECK(id != t.detour_id);
    }
    for (int i = 0; i < 50; ++i) {
        const auto [id, kind] = sample_negative(t, f.corpus, 1.0, rng);
        CHECK(kind == NegativeKind::same_task);
        CHECK(f.corpus.video(id).task_id == f.corpus.video(t.detour_id).task_id);
        CHECK(id != t.detour_id);
        CHECK(id != t.source_id);
    }
}

TEST_CASE("sample_negative hard fraction concentrates around p_hard") {
    Fixture f;
    const auto& t = f.train_tuples.front();
    Rng rng(77);
    int hard = 0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
        const auto [id, kind] = sample_negative(t, f.corpus, 0.5, rng);
        if (kind == NegativeKind::same_task) ++hard;
    }
    const double frac = static_cast<double>(hard) / n;
    CHECK(frac > 0.48);
    CHECK(frac < 0.52);
}

TEST_CASE("sample_negative without alternatives") {
    // corpus holding only the tuple's own two videos of that task
    Fixture f;
    const auto& t = f.train_tuples.front();
    std::vector<const NarratedVideo*> pair_only;
    for (const auto& v : f.w.videos)
        if (v.id == t.source_id || v.id == t.detour_id) pair_only.push_back(&v);
    const Corpus tiny = Corpus::from_videos(pair_only);
    Rng rng(5);
    CHECK_THROWS_AS(sample_negative(t, tiny, 1.0, rng), NoNegativeAvailable);
    CHECK_THROWS_AS(sample_negative(t, tiny, 0.0, rng), NoNegativeAvailable);
}

TEST_CASE("untrained retrieval loss sits near ln 2 on a balanced batch") {
    Fixture f;
    auto m = model::DetourModel<float>::init(f.mcfg, 3);
    Rng rng(9);
    double total = 0.0;
    int n = 0;
    for (size_t i = 0; i < 4 && i < f.train_tuples.size(); ++i) {
        const auto& t = f.train_tuples[i];
        const auto qids = f.vocab.tokenize(t.query);
        const auto& src = f.corpus.video(t.source_id);
        for (int label = 0; label <= 1; ++label) {
            const std::string cand =
                label ? t.detour_id : sample_negative(t, f.corpus, 0.5, rng).first;
            tad::Tape<float> tape(false);
            total += retrieval_loss_for(tape, m, src.features, t.t_s.seconds, qids,
                                        f.corpus.video(cand).features, label)
                         ->value.scalar();
            ++n;
        }
    }
    CHECK(total / n == doctest::Approx(std::log(2.0)).epsilon(0.1));
}

TEST_CASE("untrained localization loss sits near ln T") {
    Fixture f;
    auto m = model::DetourModel<float>::init(f.mcfg, 4);
    const auto& t = f.train_tuples.front();
    const auto& cand = f.corpus.video(t.detour_id);
    tad::Tape<float> tape(false);
    const auto loss = localization_loss_for(tape, m, f.corpus.video(t.source_id).features,
                                            t.t_s.seconds, f.vocab.tokenize(t.query),
                                            cand.features, t.window)
                          ->value.scalar();
    CHECK(loss == doctest::Approx(std::log(static_cast<double>(cand.duration))).epsilon(0.15));
}

TEST_CASE("corrupted tuple window raises TargetOutsideCandidate") {
    Fixture f;
    auto m = model::DetourModel<float>::init(f.mcfg, 5);
    auto t = f.train_tuples.front();
    const auto& cand = f.corpus.video(t.detour_id);
    t.window = make_window(0, cand.duration + 5);
    tad::Tape<float> tape(false);
    CHECK_THROWS_AS(localization_loss_for(tape, m, f.corpus.video(t.source_id).features,
                                          t.t_s.seconds, {}, cand.features, t.window),
                    TargetOutsideCandidate);
}

TEST_CASE("same seed twice gives identical loss curves") {
    Fixture f;
    TrainConfig cfg;
    cfg.lr = 1e-3;
    cfg.epochs = 2;
    cfg.batch_size = 8;
    cfg.seed = 42;
    const auto dir = std::filesystem::temp_directory_path() / "detours_train_det";
    std::filesystem::remove_all(dir);

    auto m1 = model::DetourModel<float>::init(f.mcfg, 11);
    const auto r1 = train_model(m1, f.vocab, f.train_tuples, f.corpus, cfg, dir / "a");
    auto m2 = model::DetourModel<float>::init(f.mcfg, 11);
    const auto r2 = train_model(m2, f.vocab, f.train_tuples, f.corpus, cfg, dir / "b");
    REQUIRE(r1.epoch_losses.size() == r2.epoch_losses.size());
    for (size_t i = 0; i < r1.epoch_losses.size(); ++i)
        CHECK(r1.epoch_losses[i] == r2.epoch_losses[i]);
}

TEST_CASE("training loss strictly decreases over the first three epochs (sigma 0)") {
    Fixture f(0.0);
    for (const char* task : {"retrieval", "localization"}) {
        TrainConfig cfg;
        cfg.lr = 1e-3;
        cfg.epochs = 3;
        cfg.batch_size = 8;
        cfg.seed = 1;
        cfg.task = task;
        const auto dir = std::filesystem::temp_directory_path() / "detours_train_dec" / task;
        std::filesystem::remove_all(dir);
        auto m = model::DetourModel<float>::init(f.mcfg, 21);
        const auto r = train_model(m, f.vocab, f.train_tuples, f.corpus, cfg, dir);
        REQUIRE(r.epoch_losses.size() == 3);
        CHECK(r.epoch_losses[0] > r.epoch_losses[1]);
        CHECK(r.epoch_losses[1] > r.epoch_losses[2]);
    }
}

TEST_CASE("resume reproduces the uninterrupted run exactly") {
    Fixture f;
    const auto base = std::filesystem::temp_directory_path() / "detours_train_resume";
    std::filesystem::remove_all(base);

    TrainConfig cfg5;
    cfg5.lr = 1e-3;
    cfg5.epochs = 5;
    cfg5.batch_size = 8;
    cfg5.seed = 9;
    auto m_full = model::DetourModel<float>::init(f.mcfg, 31);
    train_model(m_full, f.vocab, f.train_tuples, f.corpus, cfg5, base / "full");

    TrainConfig cfg3 = cfg5;
    cfg3.epochs = 3;
    auto m_part = model::DetourModel<float>::init(f.mcfg, 31);
    const auto r3 = train_model(m_part, f.vocab, f.train_tuples, f.corpus, cfg3, base / "part");

    auto m_resumed = model::DetourModel<float>::init(f.mcfg, 999); // overwritten by resume
    train_model(m_resumed, f.vocab, f.train_tuples, f.corpus, cfg5, base / "resumed",
                r3.final_checkpoint);

    const auto a = m_full.named_params();
    const auto b = m_resumed.named_params();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].second->value.data == b[i].second->value.data);
}

TEST_CASE("train config validation and defaults") {
    TrainConfig cfg;
    CHECK(cfg.lr == doctest::Approx(3e-5));
    CHECK(cfg.batch_size == 16);
    CHECK(cfg.epochs == 5);
    CHECK(cfg.p_hard == doctest::Approx(0.5));
    cfg.p_hard = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.p_hard = 0.5;
    cfg.task = "segmentation";
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_SUITE_END();
