#include "core/io.hpp"
#include "world/world.hpp"

#include <doctest.h>

#include <filesystem>

using namespace detours;
using namespace detours::world;

namespace {

WorldConfig small_cfg() {
    WorldConfig cfg;
    cfg.n_tasks = 6;
    cfg.videos_per_task = 6;
    cfg.feature_dim = 16;
    cfg.noise_sigma = 0.2;
    cfg.seed = 11;
    cfg.novel_task_fraction = 0.25;
    return cfg;
}

} // namespace

TEST_SUITE_BEGIN("world");

TEST_CASE("config validation names the field") {
    WorldConfig cfg = small_cfg();
    cfg.n_tasks = 1;
    try {
        gen_world(cfg);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "world.n_tasks");
    }
    cfg = small_cfg();
    cfg.novel_task_fraction = 1.0;
    CHECK_THROWS_AS(gen_world(cfg), ConfigError);
}

TEST_CASE("same seed twice produces byte-identical dataset files") {
    const auto base = std::filesystem::temp_directory_path() / "detours_world_det";
    std::filesystem::remove_all(base);
    const auto d1 = base / "a";
    const auto d2 = base / "b";
    save_world(gen_world(small_cfg()), d1);
    save_world(gen_world(small_cfg()), d2);
    for (const auto& name : {"videos.jsonl", "world_meta.json", "gt_detours.jsonl"}) {
        CHECK(read_text_file(d1 / name) == read_text_file(d2 / name));
    }
    // and a couple of feature files
    int checked = 0;
    for (const auto& e : std::filesystem::directory_iterator(d1 / "features")) {
        const auto rel = e.path().filename();
        CHECK(read_text_file(e.path()) == read_text_file(d2 / "features" / rel));
        if (++checked >= 5) break;
    }
}

TEST_CASE("sigma zero: videos with identical variants share step rows") {
    WorldConfig cfg = small_cfg();
    cfg.noise_sigma = 0.0;
    const World w = gen_world(cfg);
    // find two videos of one task with identical variant assignments
    bool found = false;
    for (const auto& t : w.tasks) {
        std::vector<const NarratedVideo*> vids;
        for (const auto& v : w.videos)
            if (v.task_id == t.task_id) vids.push_back(&v);
        for (size_t i = 0; i < vids.size() && !found; ++i) {
            for (size_t j = i + 1; j < vids.size() && !found; ++j) {
                const auto& si = w.video_steps.at(vids[i]->id);
                const auto& sj = w.video_steps.at(vids[j]->id);
                bool same = true;
                for (size_t s = 0; s < si.size(); ++s)
                    if (si[s].variant_value != sj[s].variant_value) same = false;
                if (!same) continue;
                found = true;
                for (size_t s = 0; s < si.size(); ++s) {
                    const float* ra = vids[i]->features.row(si[s].start);
                    const float* rb = vids[j]->features.row(sj[s].start);
                    for (int c = 0; c < cfg.feature_dim; ++c) CHECK(ra[c] == rb[c]);
                }
            }
        }
    }
    CHECK(found);
}

TEST_CASE("split_tasks arithmetic and disjointness") {
    const World w = gen_world(small_cfg());
    auto [common0, novel0] = split_tasks(w.tasks, 0.0, 1);
    CHECK(novel0.empty());
    CHECK(common0.size() == w.tasks.size());

    WorldConfig cfg40 = small_cfg();
    cfg40.n_tasks = 40;
    const World w40 = gen_world(cfg40);
    auto [common, novel] = split_tasks(w40.tasks, 0.25, cfg40.seed);
    CHECK(novel.size() == 10);
    CHECK(common.size() == 30);

    // no video id in both train and test
    for (const auto& id : w40.train_videos) CHECK(w40.test_videos.count(id) == 0);
    // novel-task videos are all test
    const std::set<std::string> novel_set(w40.novel_tasks.begin(), w40.novel_tasks.end());
    for (const auto& v : w40.videos)
        if (novel_set.count(v.task_id)) CHECK(w40.test_videos.count(v.id) == 1);
}

TEST_CASE("every task has train and test tuples at default sizes") {
    const World w = gen_world(small_cfg());
    int train = 0, test = 0, mixed = 0;
    for (const auto& g : w.gt) {
        if (g.split == "train") ++train;
        if (g.split == "test") ++test;
        if (g.split == "mixed") ++mixed;
    }
    CHECK(train > 0);
    CHECK(test > 0);
    // tuples never cross the video split without being labeled mixed
    for (const auto& g : w.gt) {
        const bool st = w.train_videos.count(g.tuple.source_id) > 0;
        const bool dt = w.train_videos.count(g.tuple.detour_id) > 0;
        if (g.split == "train") CHECK((st && dt));
        if (g.split == "test") CHECK((!st && !dt));
        if (g.split == "mixed") CHECK(st != dt);
    }
}

TEST_CASE("tuple geometry is inside both videos") {
    const World w = gen_world(small_cfg());
    CHECK(!w.gt.empty());
    for (const auto& g : w.gt) {
        const auto& src = w.video(g.tuple.source_id);
        const auto& det = w.video(g.tuple.detour_id);
        CHECK(g.tuple.source_id != g.tuple.detour_id);
        CHECK(g.tuple.t_s.seconds >= 0);
        CHECK(g.tuple.t_s.seconds <= src.duration);
        CHECK(g.tuple.window.valid());
        CHECK(g.tuple.window.end.seconds <= det.duration);
    }
}

TEST_CASE("narrations cover every step and stay sorted") {
    const World w = gen_world(small_cfg());
    for (const auto& v : w.videos) {
        CHECK(v.narrations.size() == w.video_steps.at(v.id).size());
        for (size_t i = 1; i < v.narrations.size(); ++i)
            CHECK(v.narrations[i - 1].t.seconds < v.narrations[i].t.seconds);
        CHECK(v.features.rows == v.duration);
    }
}

TEST_CASE("aligned embedder basics") {
    WorldConfig cfg = small_cfg();
    cfg.noise_sigma = 0.0;
    const World w = gen_world(cfg);
    const AlignedEmbedder emb(w);

    CHECK_THROWS_AS(emb.embed_query("how about zanzibar snow"), UnknownEntity);

    // sigma = 0: a window's mean feature equals the step latent exactly
    const auto& g = w.gt.front();
    const auto& det = w.video(g.tuple.detour_id);
    const auto we = emb.embed_window(det, g.tuple.window);
    std::vector<StepSpec> steps = w.video_steps.at(det.id);
    const StepSpec* hit = nullptr;
    for (const auto& s : steps)
        if (s.start == g.tuple.window.start.seconds) hit = &s;
    REQUIRE(hit != nullptr);
    const auto lat = w.latent(hit->canonical_step_id, hit->variant_value);
    std::vector<double> latd(lat.begin(), lat.end());
    CHECK(cosine(we, latd) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("oracle soundness: detour window matches queried variant better than source step") {
    WorldConfig cfg = small_cfg();
    cfg.n_tasks = 10;
    cfg.noise_sigma = 0.5;
    const World w = gen_world(cfg);
    const AlignedEmbedder emb(w);
    int ok = 0, total = 0;
    for (const auto& g : w.gt) {
        const auto& src = w.video(g.tuple.source_id);
        const auto& det = w.video(g.tuple.detour_id);
        // the source step corresponding to the detour point
        const auto& steps = w.video_steps.at(src.id);
        const StepSpec* sstep = nullptr;
        for (const auto& s : steps)
            if (s.start == g.tuple.t_s.seconds) sstep = &s;
        REQUIRE(sstep != nullptr);
        const auto lat = w.latent(sstep->canonical_step_id, g.value);
        std::vector<double> latd(lat.begin(), lat.end());
        const auto wdet = emb.embed_window(det, g.tuple.window);
        const auto wsrc = emb.embed_window(src, make_window(sstep->start, sstep->start + sstep->duration));
        ++total;
        if (cosine(wdet, latd) > cosine(wsrc, latd)) ++ok;
    }
    CHECK(total > 0);
    CHECK(static_cast<double>(ok) / total >= 0.95);
}

TEST_CASE("query naming a variant ranks the containing video above its twin without it") {
    WorldConfig cfg = small_cfg();
    cfg.noise_sigma = 0.0;
    cfg.feature_dim = 32;
    cfg.n_tasks = 10;
    const World w = gen_world(cfg);
    const AlignedEmbedder emb(w);
    // source and detour differ only at the queried step: the detour
    // contains the named variant, the source does not. Whole-video means
    // carry cross-latent noise, so the ordering is checked corpus-wide.
    int wins = 0, total = 0;
    double gap = 0.0;
    for (const auto& g : w.gt) {
        if (g.value == "plain") continue;
        if (g.tuple.query.find(g.value) == std::string::npos) continue; // query names the source value
        const auto q = emb.embed_query(g.tuple.query);
        const double cd = cosine(emb.embed_video(w.video(g.tuple.detour_id)), q);
        const double cs = cosine(emb.embed_video(w.video(g.tuple.source_id)), q);
        if (cd > cs) ++wins;
        gap += cd - cs;
        ++total;
    }
    REQUIRE(total > 20);
    CHECK(static_cast<double>(wins) / total >= 0.8);
    CHECK(gap / total > 0.05);
}

TEST_CASE("world save/load round-trip") {
    const auto dir = std::filesystem::temp_directory_path() / "detours_world_rt";
    std::filesystem::remove_all(dir);
    const World w = gen_world(small_cfg());
    save_world(w, dir);
    const World back = load_world(dir);
    CHECK(back.videos.size() == w.videos.size());
    CHECK(back.gt.size() == w.gt.size());
    CHECK(back.tasks.size() == w.tasks.size());
    CHECK(back.train_videos == w.train_videos);
    CHECK(back.video(w.videos[0].id).features.data == w.videos[0].features.data);
    CHECK(back.oracle_summary(w.videos[0].id).steps.size() ==
          w.oracle_summary(w.videos[0].id).steps.size());
}

TEST_SUITE_END();
