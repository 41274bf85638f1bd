#include "core/time.hpp"

#include "core/errors.hpp"

#include <algorithm>
#include <cassert>
#include <cstdio>

namespace detours {

namespace {

bool all_digits(std::string_view s) {
    if (s.empty()) return false;
    return std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

int to_int(std::string_view s) {
    int v = 0;
    for (char c : s) v = v * 10 + (c - '0');
    return v;
}

} // namespace

std::optional<Timestamp> try_parse_timestamp(std::string_view text) {
    const auto c1 = text.find(':');
    if (c1 == std::string_view::npos) return std::nullopt;
    const auto c2 = text.find(':', c1 + 1);
    if (c2 == std::string_view::npos) return std::nullopt;
    if (text.find(':', c2 + 1) != std::string_view::npos) return std::nullopt;

    const std::string_view h = text.substr(0, c1);
    const std::string_view m = text.substr(c1 + 1, c2 - c1 - 1);
    const std::string_view s = text.substr(c2 + 1);

    if (!all_digits(h) || h.size() > 2) return std::nullopt;
    if (!all_digits(m) || m.size() != 2) return std::nullopt;
    if (!all_digits(s) || s.size() != 2) return std::nullopt;

    const int mm = to_int(m);
    const int ss = to_int(s);
    if (mm >= 60 || ss >= 60) return std::nullopt;

    return Timestamp{3600 * to_int(h) + 60 * mm + ss};
}

Timestamp parse_timestamp(std::string_view text) {
    if (auto t = try_parse_timestamp(text)) return *t;
    throw MalformedTimestamp(std::string(text));
}

std::string format_timestamp(Timestamp t) {
    assert(t.seconds >= 0 && t.seconds < 360000);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%02d:%02d:%02d", t.seconds / 3600,
                  (t.seconds / 60) % 60, t.seconds % 60);
    return buf;
}

double interval_iou(const TimeWindow& a, const TimeWindow& b) {
    const int inter = std::max(
        0, std::min(a.end.seconds, b.end.seconds) - std::max(a.start.seconds, b.start.seconds));
    const int uni = a.length() + b.length() - inter;
    if (uni <= 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

} // namespace detours
