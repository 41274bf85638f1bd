#include "bench/bench.hpp"
#include "core/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace detours;
using namespace detours::bench;

namespace {

std::vector<std::string> make_candidates(int n) {
    std::vector<std::string> ids;
    for (int i = 0; i < n; ++i) {
        char buf[8];
        std::snprintf(buf, sizeof(buf), "c%03d", i);
        ids.emplace_back(buf);
    }
    return ids;
}

} // namespace

TEST_SUITE_BEGIN("bench");

TEST_CASE("oracle scorer ranks the ground truth first") {
    const auto ids = make_candidates(10);
    const auto r = rank_candidates([&](const std::string& id) { return id == "c004" ? 1.0 : 0.0; },
                                   "c004", ids, "t");
    CHECK(r.rank == 1);
    CHECK(r.candidate_count == 10);
}

TEST_CASE("constant scorer falls back to the id tie-break") {
    const auto ids = make_candidates(10);
    auto flat = [](const std::string&) { return 0.5; };
    CHECK(rank_candidates(flat, "c000", ids, "t").rank == 1);
    CHECK(rank_candidates(flat, "c004", ids, "t").rank == 5);
    CHECK(rank_candidates(flat, "c009", ids, "t").rank == 10);
}

TEST_CASE("missing ground truth is an error") {
    const auto ids = make_candidates(3);
    CHECK_THROWS_AS(rank_candidates([](const std::string&) { return 0.0; }, "zz", ids, "t"),
                    MissingGroundTruth);
}

TEST_CASE("rank is invariant under strictly monotone score transforms") {
    const auto ids = make_candidates(20);
    Rng rng(3);
    std::map<std::string, double> scores;
    for (const auto& id : ids) scores[id] = rng.uniform();
    const auto base = rank_candidates([&](const std::string& id) { return scores.at(id); }, "c007",
                                      ids, "t");
    const auto warped = rank_candidates(
        [&](const std::string& id) { return std::exp(3.0 * scores.at(id)) + 1.0; }, "c007", ids,
        "t");
    CHECK(base.rank == warped.rank);
}

TEST_CASE("random scorer mean rank matches the uniform prediction") {
    const auto ids = make_candidates(100);
    Rng rng(11);
    double total = 0.0;
    const int tuples = 1000;
    std::vector<RankResult> results;
    for (int t = 0; t < tuples; ++t) {
        std::map<std::string, double> scores;
        for (const auto& id : ids) scores[id] = rng.uniform();
        const std::string gt = ids[static_cast<size_t>(rng.uniform_int(100))];
        const auto r =
            rank_candidates([&](const std::string& id) { return scores.at(id); }, gt, ids, "t");
        total += r.rank;
        results.push_back(r);
    }
    const double mean = total / tuples;
    CHECK(mean > 47.5);
    CHECK(mean < 53.5);
    const int medr = median_rank(results);
    CHECK(medr >= 47);
    CHECK(medr <= 54);
}

TEST_CASE("recall and median rank fixed values") {
    std::vector<RankResult> rs = {{"a", 1, 100}, {"b", 3, 100}, {"c", 20, 100}};
    CHECK(recall_at_k(rs, 5) == doctest::Approx(2.0 / 3.0));
    CHECK(median_rank(rs) == 3);
    CHECK_THROWS_AS(recall_at_k({}, 5), EmptyResults);
    CHECK_THROWS_AS(median_rank({}), EmptyResults);

    // non-decreasing in k
    for (int k = 1; k < 30; ++k) CHECK(recall_at_k(rs, k) <= recall_at_k(rs, k + 1));
}

TEST_CASE("localization recall fixed values and monotonicity") {
    auto mk = [](double iou) { return LocResult{"t", make_window(0, 10), make_window(0, 10), iou}; };
    const std::vector<LocResult> rs = {mk(0.35), mk(0.55), mk(0.75)};
    const auto lr = loc_recall(rs);
    REQUIRE(lr.at_threshold.size() == 3);
    CHECK(lr.at_threshold[0].second == doctest::Approx(1.0));
    CHECK(lr.at_threshold[1].second == doctest::Approx(2.0 / 3.0));
    CHECK(lr.at_threshold[2].second == doctest::Approx(1.0 / 3.0));
    for (size_t i = 1; i < lr.at_threshold.size(); ++i)
        CHECK(lr.at_threshold[i].second <= lr.at_threshold[i - 1].second);

    const std::vector<LocResult> exact = {mk(1.0), mk(1.0)};
    const auto perfect = loc_recall(exact);
    for (const auto& [tau, r1] : perfect.at_threshold) CHECK(r1 == doctest::Approx(1.0));
    CHECK(perfect.mean_r1 == doctest::Approx(1.0));
}

TEST_CASE("weighted pool with uniform similarities equals mean pool") {
    world::WorldConfig cfg;
    cfg.n_tasks = 3;
    cfg.videos_per_task = 4;
    cfg.feature_dim = 8;
    cfg.noise_sigma = 0.0;
    cfg.seed = 2;
    world::World w = world::gen_world(cfg);
    const world::AlignedEmbedder emb(w);

    // a tuple whose detour video is single-latent-dominated is not needed:
    // any video with constant rows has uniform frame similarities. Build one.
    NarratedVideo flat;
    flat.id = "flat";
    flat.task_id = w.tasks[0].task_id;
    flat.duration = 6;
    flat.features = Mat32(6, 8);
    for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 8; ++c) flat.features.at(r, c) = (c == 1) ? 1.0f : 0.25f;
    w.videos.push_back(flat);

    const auto& g = w.gt.front();
    const BaselineVariant wp{BaselineName::weighted_pool, Inputs::both};
    const BaselineVariant mp{BaselineName::mean_pool, Inputs::both};
    auto swp = baseline_scorer(wp, w, emb, g, nullptr);
    auto smp = baseline_scorer(mp, w, emb, g, nullptr);
    CHECK(swp("flat") == doctest::Approx(smp("flat")).epsilon(1e-9));
}

TEST_CASE("weighted pool rejects the source-only input combination") {
    const BaselineVariant bad{BaselineName::weighted_pool, Inputs::source_only};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("benchmark guards the train/test split") {
    world::WorldConfig cfg;
    cfg.n_tasks = 4;
    cfg.videos_per_task = 6;
    cfg.feature_dim = 8;
    cfg.noise_sigma = 0.1;
    cfg.seed = 6;
    const world::World w = world::gen_world(cfg);
    auto tuples = test_tuples_of(w);
    REQUIRE(!tuples.empty());

    BenchmarkConfig bcfg;
    bcfg.run_baselines = true;
    bcfg.input_combos = {Inputs::both};
    // clean run is fine without any model
    const auto report = run_benchmark(w, tuples, w.train_videos, nullptr, nullptr, nullptr,
                                      nullptr, nullptr, bcfg);
    CHECK(!report.rows.empty());

    // inject a leaked training video id
    auto leaked = tuples;
    leaked[0].tuple.source_id = *w.train_videos.begin();
    CHECK_THROWS_AS(run_benchmark(w, leaked, w.train_videos, nullptr, nullptr, nullptr, nullptr,
                                  nullptr, bcfg),
                    SplitLeak);
}

TEST_CASE("empty novel split leaves only common rows, equal to overall") {
    world::WorldConfig cfg;
    cfg.n_tasks = 4;
    cfg.videos_per_task = 6;
    cfg.feature_dim = 8;
    cfg.noise_sigma = 0.0;
    cfg.seed = 8;
    cfg.novel_task_fraction = 0.0;
    const world::World w = world::gen_world(cfg);
    const auto tuples = test_tuples_of(w);
    REQUIRE(!tuples.empty());
    BenchmarkConfig bcfg;
    bcfg.input_combos = {Inputs::both};
    const auto report = run_benchmark(w, tuples, w.train_videos, nullptr, nullptr, nullptr,
                                      nullptr, nullptr, bcfg);
    for (const auto& row : report.rows) CHECK(row.split != "novel");
    const auto mc = report.find("mean_pool", "both", "common", "recall@5");
    const auto mo = report.find("mean_pool", "both", "overall", "recall@5");
    REQUIRE(mc.has_value());
    REQUIRE(mo.has_value());
    CHECK(*mc == doctest::Approx(*mo));
}

TEST_CASE("oracle sanity: gt-window feature scoring pins the median rank to 1") {
    world::WorldConfig cfg;
    cfg.n_tasks = 6;
    cfg.videos_per_task = 6;
    cfg.feature_dim = 16;
    cfg.noise_sigma = 0.0;
    cfg.seed = 12;
    const world::World w = world::gen_world(cfg);
    const world::AlignedEmbedder emb(w);
    std::vector<std::string> candidates;
    for (const auto& v : w.videos) candidates.push_back(v.id);
    std::sort(candidates.begin(), candidates.end());

    std::vector<RankResult> results;
    for (const auto& g : test_tuples_of(w)) {
        const auto ref = emb.embed_window(w.video(g.tuple.detour_id), g.tuple.window);
        // the detour window is one step of the detour video; candidates are
        // represented by their window at the same step index
        const auto& det_steps = w.video_steps.at(g.tuple.detour_id);
        int step_index = 0;
        for (size_t i = 0; i < det_steps.size(); ++i)
            if (det_steps[i].start == g.tuple.window.start.seconds) step_index = static_cast<int>(i);
        auto scorer = [&](const std::string& id) {
            const auto& steps = w.video_steps.at(id);
            const auto& s = steps[std::min<size_t>(static_cast<size_t>(step_index), steps.size() - 1)];
            return world::cosine(
                emb.embed_window(w.video(id), make_window(s.start, s.start + s.duration)), ref);
        };
        results.push_back(rank_candidates(scorer, g.tuple.detour_id, candidates, "t"));
    }
    REQUIRE(!results.empty());
    CHECK(median_rank(results) == 1);
}

TEST_CASE("report lookup and csv shape") {
    Report r;
    r.rows.push_back({"ours", "both", "overall", "recall@5", 0.75});
    CHECK(r.find("ours", "both", "overall", "recall@5") == doctest::Approx(0.75));
    CHECK(!r.find("ours", "both", "overall", "recall@50").has_value());
    const std::string csv = r.to_csv();
    CHECK(csv.find("method,inputs,split,metric,value") == 0);
    CHECK(csv.find("ours,both,overall,recall@5,0.75") != std::string::npos);
}

TEST_SUITE_END();
