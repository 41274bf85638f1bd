#include "core/errors.hpp"
#include "core/io.hpp"
#include "core/rng.hpp"
#include "core/time.hpp"

#include <doctest.h>

#include <filesystem>

using namespace detours;

TEST_SUITE_BEGIN("core");

TEST_CASE("parse_timestamp basic values") {
    CHECK(parse_timestamp("00:00:00").seconds == 0);
    CHECK(parse_timestamp("00:01:30").seconds == 90);
    CHECK(parse_timestamp("01:02:03").seconds == 3723);
    CHECK(parse_timestamp("1:02:03").seconds == 3723);
}

TEST_CASE("parse_timestamp rejects malformed text") {
    CHECK_THROWS_AS(parse_timestamp("no colons"), MalformedTimestamp);
    CHECK_THROWS_AS(parse_timestamp("00:00"), MalformedTimestamp);
    CHECK_THROWS_AS(parse_timestamp("00:60:00"), MalformedTimestamp);
    CHECK_THROWS_AS(parse_timestamp("00:00:61"), MalformedTimestamp);
    CHECK_THROWS_AS(parse_timestamp("00:0:00"), MalformedTimestamp);
    CHECK_THROWS_AS(parse_timestamp("aa:bb:cc"), MalformedTimestamp);
    CHECK_THROWS_AS(parse_timestamp("00:00:00:00"), MalformedTimestamp);
    CHECK(!try_parse_timestamp("00:99:00").has_value());
}

TEST_CASE("format_timestamp inverse examples") {
    CHECK(format_timestamp(Timestamp{0}) == "00:00:00");
    CHECK(format_timestamp(Timestamp{90}) == "00:01:30");
    CHECK(format_timestamp(Timestamp{3723}) == "01:02:03");
}

TEST_CASE("timestamp round-trip over random values") {
    Rng rng(1234);
    for (int i = 0; i < 5000; ++i) {
        const int t = rng.uniform_int(360000);
        CHECK(parse_timestamp(format_timestamp(Timestamp{t})).seconds == t);
    }
}

TEST_CASE("interval_iou fixed values") {
    CHECK(interval_iou(make_window(10, 20), make_window(10, 20)) == doctest::Approx(1.0));
    CHECK(interval_iou(make_window(0, 5), make_window(10, 15)) == doctest::Approx(0.0));
    CHECK(interval_iou(make_window(0, 10), make_window(5, 15)) == doctest::Approx(5.0 / 15.0));
}

TEST_CASE("interval_iou randomized properties") {
    Rng rng(99);
    for (int i = 0; i < 2000; ++i) {
        const int a0 = rng.uniform_int(100);
        const int a1 = a0 + 1 + rng.uniform_int(50);
        const int b0 = rng.uniform_int(100);
        const int b1 = b0 + 1 + rng.uniform_int(50);
        const auto a = make_window(a0, a1);
        const auto b = make_window(b0, b1);
        const double ab = interval_iou(a, b);
        CHECK(ab >= 0.0);
        CHECK(ab <= 1.0);
        CHECK(interval_iou(b, a) == doctest::Approx(ab));
        CHECK(interval_iou(a, a) == doctest::Approx(1.0));
    }
}

TEST_CASE("dtrf round-trip and header checks") {
    const auto dir = std::filesystem::temp_directory_path() / "detours_core_test";
    std::filesystem::create_directories(dir);
    Mat32 m(3, 4);
    Rng rng(5);
    for (auto& x : m.data) x = static_cast<float>(rng.normal());
    const auto path = dir / "t.dtrf";
    write_dtrf(path, m);
    const Mat32 back = read_dtrf(path);
    CHECK(back.rows == 3);
    CHECK(back.cols == 4);
    CHECK(back.data == m.data);

    // corrupt the magic
    auto bytes = read_text_file(path);
    bytes[0] = 'X';
    write_text_file(path, bytes);
    CHECK_THROWS_AS(read_dtrf(path), FormatError);
}

TEST_CASE("video jsonl round-trip") {
    NarratedVideo v;
    v.id = "vid1";
    v.task_id = "task1";
    v.duration = 4;
    v.narrations = {{Timestamp{0}, "hello"}, {Timestamp{2}, "world"}};
    v.features = Mat32(4, 2);
    const auto dir = std::filesystem::temp_directory_path() / "detours_core_vids";
    std::filesystem::remove_all(dir);
    save_videos(dir, {v});
    const auto back = load_videos(dir);
    REQUIRE(back.size() == 1);
    CHECK(back[0].id == "vid1");
    CHECK(back[0].duration == 4);
    CHECK(back[0].narrations.size() == 2);
    CHECK(back[0].narrations[1].text == "world");
    CHECK(back[0].features.rows == 4);
}

TEST_SUITE_END();
