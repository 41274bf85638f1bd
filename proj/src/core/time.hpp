#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace detours {

// One-second grid everywhere: features arrive at one row per second, so
// all timing is integer seconds.
struct Timestamp {
    int seconds = 0;

    friend auto operator<=>(const Timestamp&, const Timestamp&) = default;
};

// Half-open [start, end) in seconds. Rendered closed ("[A - B]") in
// human-readable output; length arithmetic stays exact this way.
struct TimeWindow {
    Timestamp start;
    Timestamp end;

    int length() const { return end.seconds - start.seconds; }
    bool valid() const { return start.seconds >= 0 && start.seconds < end.seconds; }
    bool contains(int second) const {
        return second >= start.seconds && second < end.seconds;
    }

    friend auto operator<=>(const TimeWindow&, const TimeWindow&) = default;
};

inline TimeWindow make_window(int start, int end) {
    return TimeWindow{Timestamp{start}, Timestamp{end}};
}

// "HH:MM:SS" -> seconds. Throws MalformedTimestamp on pattern violation
// or field overflow (minutes/seconds must be < 60). The non-throwing
// variant is what the completion parsers use: a bad timestamp there is a
// rejection, not a crash.
Timestamp parse_timestamp(std::string_view text);
std::optional<Timestamp> try_parse_timestamp(std::string_view text);

// Inverse of parse_timestamp for t < 360000 (100 hours).
std::string format_timestamp(Timestamp t);

// Intersection-over-union of two half-open integer windows, in [0, 1].
double interval_iou(const TimeWindow& a, const TimeWindow& b);

} // namespace detours
