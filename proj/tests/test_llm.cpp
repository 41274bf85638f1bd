#include "llm/backend.hpp"
#include "llm/prompt.hpp"
#include "parse/parse.hpp"
#include "world/world.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <thread>

using namespace detours;
using namespace detours::llm;

namespace {

world::World& test_world() {
    static world::World w = [] {
        world::WorldConfig cfg;
        cfg.n_tasks = 4;
        cfg.videos_per_task = 6;
        cfg.feature_dim = 8;
        cfg.noise_sigma = 0.1;
        cfg.seed = 21;
        cfg.novel_task_fraction = 0.25;
        return world::gen_world(cfg);
    }();
    return w;
}

} // namespace

TEST_SUITE_BEGIN("llm");

TEST_CASE("summary prompt requires narrations and embeds them verbatim") {
    NarratedVideo empty;
    empty.id = "e";
    CHECK_THROWS_AS(build_summary_prompt(empty), EmptyNarrations);

    NarratedVideo v;
    v.id = "v";
    v.duration = 120;
    v.narrations = {{Timestamp{90}, "whisk the eggs"}};
    const auto msgs = build_summary_prompt(v);
    REQUIRE(msgs.size() == 2);
    CHECK(msgs[0].role == Role::system);
    CHECK(msgs[1].role == Role::user);
    CHECK(msgs[1].content.find("00:01:30 whisk the eggs") != std::string::npos);

    // purity: identical inputs, identical bytes
    CHECK(build_summary_prompt(v) == msgs);
}

TEST_CASE("summary prompt narration block matches the world generator output") {
    const auto& w = test_world();
    const auto& v = w.videos.front();
    const auto msgs = build_summary_prompt(v);
    const std::string block = render_narration_block(v);
    CHECK(msgs[1].content.find(block) != std::string::npos);
}

TEST_CASE("detour prompt embeds both summaries, A before B") {
    const auto& w = test_world();
    const auto a = w.oracle_summary(w.videos[0].id);
    const auto b = w.oracle_summary(w.videos[1].id);
    const auto msgs = build_detour_prompt(a, b);
    const std::string& user = msgs[1].content;
    CHECK(user.find(render_summary_block(a)) != std::string::npos);
    CHECK(user.find(render_summary_block(b)) != std::string::npos);
    CHECK(user.find(render_summary_block(a)) < user.find(render_summary_block(b)));

    VideoSummary empty;
    empty.video_id = "x";
    CHECK_THROWS_AS(build_detour_prompt(empty, a), EmptySummary);
    CHECK_THROWS_AS(build_detour_prompt(a, empty), EmptySummary);

    // identical summaries produce two identical step blocks
    const auto same = build_detour_prompt(a, a);
    const std::string blk = render_summary_block(a);
    size_t first = same[1].content.find(blk);
    REQUIRE(first != std::string::npos);
    CHECK(same[1].content.find(blk, first + 1) != std::string::npos);
}

TEST_CASE("prompts for summaries differing at one step differ only in those lines") {
    const auto& w = test_world();
    // find a gt pair: source and detour differ at exactly one step
    const auto& g = w.gt.front();
    auto a = w.oracle_summary(g.tuple.source_id);
    auto b = w.oracle_summary(g.tuple.detour_id);
    const std::string ra = render_summary_block(a);
    const std::string rb = render_summary_block(b);
    // count differing lines (timestamps may differ everywhere, so compare
    // descriptions only)
    int diff_desc = 0;
    REQUIRE(a.steps.size() == b.steps.size());
    for (size_t i = 0; i < a.steps.size(); ++i)
        if (a.steps[i].text != b.steps[i].text) ++diff_desc;
    CHECK(diff_desc == 1);
    CHECK(ra != rb);
}

TEST_CASE("offline backend is deterministic and parseable") {
    auto& w = test_world();
    OfflineBackend backend(w);
    const auto msgs = build_summary_prompt(w.videos[2]);
    const std::string c1 = backend.complete(msgs);
    const std::string c2 = backend.complete(msgs);
    CHECK(c1 == c2);

    const auto parsed = parse::parse_summary(c1, w.videos[2].id);
    const auto* s = std::get_if<VideoSummary>(&parsed);
    REQUIRE(s != nullptr);
    CHECK(!parse::validate_summary(*s, w.videos[2].duration).has_value());

    // parsed steps equal the oracle's
    const auto oracle = w.oracle_summary(w.videos[2].id);
    REQUIRE(s->steps.size() == oracle.steps.size());
    for (size_t i = 0; i < s->steps.size(); ++i) {
        CHECK(s->steps[i].window == oracle.steps[i].window);
        CHECK(s->steps[i].text == oracle.steps[i].text);
    }
}

TEST_CASE("offline backend reproduces ground-truth detour tuples") {
    auto& w = test_world();
    OfflineBackend backend(w);
    const auto& g = w.gt.front();
    const auto msgs = build_detour_prompt(w.oracle_summary(g.tuple.source_id),
                                          w.oracle_summary(g.tuple.detour_id));
    const std::string text = backend.complete(msgs);
    const auto parsed = parse::parse_detour(text, "pair");
    const auto* d = std::get_if<parse::ParsedDetour>(&parsed);
    REQUIRE(d != nullptr);
    CHECK(d->t_s == g.tuple.t_s);
    CHECK(d->window == g.tuple.window);
    CHECK(d->query == g.tuple.query);
}

TEST_CASE("fault injection always produces a rejected completion") {
    auto& w = test_world();
    OfflineBackend clean_backend(w);
    const auto check_fault = [&](const std::vector<ChatMessage>& msgs, bool is_detour,
                                 const std::string& id, int duration) {
        const std::string clean = clean_backend.complete(msgs);
        for (const FaultKind kind : {FaultKind::prose, FaultKind::drop_timestamps,
                                     FaultKind::truncate, FaultKind::corrupt_timestamp}) {
            const std::string bad = FaultInjector::corrupt(clean, kind, is_detour);
            const auto expected = FaultInjector::expected_reason(kind, is_detour);
            if (!is_detour) {
                const auto r = parse::parse_summary(bad, id);
                if (const auto* s = std::get_if<VideoSummary>(&r)) {
                    const auto v = parse::validate_summary(*s, duration);
                    REQUIRE(v.has_value());
                    CHECK(v->reason == expected);
                } else {
                    CHECK(std::get_if<parse::RejectionReport>(&r)->reason == expected);
                }
            } else {
                const auto r = parse::parse_detour(bad, id);
                const auto* rej = std::get_if<parse::RejectionReport>(&r);
                REQUIRE(rej != nullptr);
                CHECK(rej->reason == expected);
            }
        }
    };
    const auto& v = w.videos[1];
    check_fault(build_summary_prompt(v), false, v.id, v.duration);
    const auto& g = w.gt.front();
    check_fault(build_detour_prompt(w.oracle_summary(g.tuple.source_id),
                                    w.oracle_summary(g.tuple.detour_id)),
                true, "pair", 0);
}

TEST_CASE("fault decision is a pure function of the completion") {
    auto& w = test_world();
    OfflineBackend b1(w, 0.5, 99);
    OfflineBackend b2(w, 0.5, 99);
    const auto msgs = build_summary_prompt(w.videos[0]);
    CHECK(b1.complete(msgs) == b2.complete(msgs));
}

TEST_CASE("http backend retries a 429 then succeeds") {
    std::atomic<int> calls{0};
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (calls.fetch_add(1) == 0) {
            res.status = 429;
            res.set_content("slow down", "text/plain");
            return;
        }
        nlohmann::json body = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "Recipe: ok"}}}}}}};
        res.set_content(body.dump(), "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::http;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    cfg.max_retries = 2;
    cfg.backoff_base_seconds = 0.05;
    HttpBackend backend(cfg);
    const std::string out = backend.complete({{Role::user, "hello"}});
    CHECK(out == "Recipe: ok");
    CHECK(calls.load() == 2);

    server.stop();
    t.join();
}

TEST_CASE("http backend exhausts retries into NetworkError") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.status = 503;
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::http;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    cfg.max_retries = 1;
    cfg.backoff_base_seconds = 0.01;
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete({{Role::user, "x"}}), NetworkError);

    server.stop();
    t.join();
}

TEST_CASE("malformed response body is a ProtocolError") {
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content("{\"nope\": true}", "application/json");
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread t([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    BackendConfig cfg;
    cfg.kind = BackendConfig::Kind::http;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
    cfg.max_retries = 0;
    HttpBackend backend(cfg);
    CHECK_THROWS_AS(backend.complete({{Role::user, "x"}}), ProtocolError);

    server.stop();
    t.join();
}

TEST_CASE("backoff schedule doubles from the one-second base") {
    CHECK(backoff_delay_seconds(0, 1.0) == doctest::Approx(1.0));
    CHECK(backoff_delay_seconds(1, 1.0) == doctest::Approx(2.0));
    CHECK(backoff_delay_seconds(2, 1.0) == doctest::Approx(4.0));
    BackendConfig def;
    CHECK(def.backoff_base_seconds == doctest::Approx(1.0));
    CHECK(def.temperature == doctest::Approx(0.0));
}

TEST_SUITE_END();
