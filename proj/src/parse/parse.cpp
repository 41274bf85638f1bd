#include "parse/parse.hpp"

#include "core/errors.hpp"
#include "core/time.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace detours::parse {

using nlohmann::json;

namespace {

std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : text) {
        if (c == '\n') {
            if (!cur.empty() && cur.back() == '\r') cur.pop_back();
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    return lines;
}

std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

bool starts_with_marker(const std::string& line, const std::string& marker, size_t* after) {
    size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (line.compare(i, marker.size(), marker) != 0) return false;
    *after = i + marker.size();
    return true;
}

// "Step <k>:" prefix; returns position just after the colon.
bool step_prefix(const std::string& line, size_t* after) {
    size_t i = 0;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (line.compare(i, 4, "Step") != 0) return false;
    i += 4;
    if (i >= line.size() || !std::isspace(static_cast<unsigned char>(line[i]))) return false;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    size_t digits = 0;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) {
        ++i;
        ++digits;
    }
    if (digits == 0) return false;
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i >= line.size() || line[i] != ':') return false;
    *after = i + 1;
    return true;
}

// "[A - B]" starting at or after `pos`; fills window, advances pos past
// the closing bracket. Returns false when brackets are absent, throws
// nothing: malformed timestamps are reported via `bad_ts`.
bool parse_bracket_window(const std::string& s, size_t pos, TimeWindow* out, size_t* end_pos,
                          bool* bad_ts) {
    *bad_ts = false;
    const size_t open = s.find('[', pos);
    if (open == std::string::npos) return false;
    const size_t close = s.find(']', open);
    if (close == std::string::npos) return false;
    const std::string inner = s.substr(open + 1, close - open - 1);
    const size_t dash = inner.find('-');
    if (dash == std::string::npos) {
        *bad_ts = true;
        return false;
    }
    const auto a = try_parse_timestamp(trim(inner.substr(0, dash)));
    const auto b = try_parse_timestamp(trim(inner.substr(dash + 1)));
    if (!a || !b || !(a->seconds < b->seconds)) {
        *bad_ts = true;
        return false;
    }
    *out = TimeWindow{*a, *b};
    *end_pos = close + 1;
    return true;
}

} // namespace

const char* reject_reason_name(RejectReason r) {
    switch (r) {
        case RejectReason::NoParse: return "NoParse";
        case RejectReason::BadTimestamp: return "BadTimestamp";
        case RejectReason::LowCoverage: return "LowCoverage";
        case RejectReason::OutOfRange: return "OutOfRange";
        case RejectReason::MissingField: return "MissingField";
    }
    return "?";
}

RejectReason reject_reason_from_name(const std::string& s) {
    if (s == "NoParse") return RejectReason::NoParse;
    if (s == "BadTimestamp") return RejectReason::BadTimestamp;
    if (s == "LowCoverage") return RejectReason::LowCoverage;
    if (s == "OutOfRange") return RejectReason::OutOfRange;
    if (s == "MissingField") return RejectReason::MissingField;
    throw FormatError("unknown reject reason: " + s);
}

json reject_to_json(const RejectionReport& r) {
    return json{{"id", r.id},
                {"reason", reject_reason_name(r.reason)},
                {"line", r.line},
                {"detail", r.detail}};
}

SummaryResult parse_summary(const std::string& text, const std::string& video_id) {
    const auto lines = split_lines(text);
    VideoSummary s;
    s.video_id = video_id;
    bool have_recipe = false;

    for (size_t li = 0; li < lines.size(); ++li) {
        const std::string& line = lines[li];
        size_t after = 0;
        if (!have_recipe && starts_with_marker(line, "Recipe:", &after)) {
            const std::string name = trim(line.substr(after));
            if (!name.empty()) {
                s.recipe = name;
                have_recipe = true;
            }
            continue;
        }
        if (step_prefix(line, &after)) {
            TimeWindow w;
            size_t end_pos = 0;
            bool bad_ts = false;
            if (!parse_bracket_window(line, after, &w, &end_pos, &bad_ts)) {
                return RejectionReport{video_id, RejectReason::BadTimestamp,
                                       static_cast<int>(li), "step line without a valid window"};
            }
            const std::string desc = trim(line.substr(end_pos));
            if (desc.empty()) continue; // not a grammar instance
            s.steps.push_back({w, desc});
        }
    }

    if (s.steps.empty())
        return RejectionReport{video_id, RejectReason::NoParse, -1, "no step line parsed"};
    if (!have_recipe)
        return RejectionReport{video_id, RejectReason::MissingField, -1, "missing Recipe: line"};
    return s;
}

int union_length(const std::vector<TimeWindow>& windows) {
    std::vector<std::pair<int, int>> iv;
    iv.reserve(windows.size());
    for (const auto& w : windows) iv.emplace_back(w.start.seconds, w.end.seconds);
    std::sort(iv.begin(), iv.end());
    int total = 0, cur_start = 0, cur_end = -1;
    bool open = false;
    for (const auto& [a, b] : iv) {
        if (!open || a > cur_end) {
            if (open) total += cur_end - cur_start;
            cur_start = a;
            cur_end = b;
            open = true;
        } else {
            cur_end = std::max(cur_end, b);
        }
    }
    if (open) total += cur_end - cur_start;
    return total;
}

std::optional<RejectionReport> validate_summary(const VideoSummary& s, int duration) {
    std::vector<TimeWindow> windows;
    for (size_t i = 0; i < s.steps.size(); ++i) {
        const auto& w = s.steps[i].window;
        if (w.start.seconds < 0 || w.end.seconds > duration)
            return RejectionReport{s.video_id, RejectReason::OutOfRange, static_cast<int>(i),
                                   "step window outside [0, duration]"};
        windows.push_back(w);
    }
    // coverage >= 0.8 * duration, exact in integers
    if (5 * union_length(windows) < 4 * duration)
        return RejectionReport{s.video_id, RejectReason::LowCoverage, -1,
                               "step coverage below 80% of duration"};
    return std::nullopt;
}

DetourResult parse_detour(const std::string& text, const std::string& pair_id) {
    static const std::string kTimeMarker = "Detour time in Video A:";
    static const std::string kWindowMarker = "Detour time window in Video B:";
    static const std::string kPromptMarker = "Detour text prompt:";

    const size_t tpos = text.find(kTimeMarker);
    if (tpos == std::string::npos)
        return RejectionReport{pair_id, RejectReason::MissingField, -1, "missing detour time field"};
    // timestamp token follows the marker
    size_t i = tpos + kTimeMarker.size();
    while (i < text.size() && text[i] == ' ') ++i;
    size_t j = i;
    while (j < text.size() && (std::isdigit(static_cast<unsigned char>(text[j])) || text[j] == ':'))
        ++j;
    const auto ts = try_parse_timestamp(text.substr(i, j - i));
    if (!ts)
        return RejectionReport{pair_id, RejectReason::BadTimestamp, -1, "unparseable detour time"};

    const size_t wpos = text.find(kWindowMarker);
    if (wpos == std::string::npos)
        return RejectionReport{pair_id, RejectReason::MissingField, -1, "missing window field"};
    TimeWindow win;
    size_t end_pos = 0;
    bool bad_ts = false;
    if (!parse_bracket_window(text, wpos + kWindowMarker.size(), &win, &end_pos, &bad_ts)) {
        if (bad_ts)
            return RejectionReport{pair_id, RejectReason::BadTimestamp, -1, "unparseable window"};
        return RejectionReport{pair_id, RejectReason::MissingField, -1, "missing window brackets"};
    }

    const size_t ppos = text.find(kPromptMarker);
    if (ppos == std::string::npos)
        return RejectionReport{pair_id, RejectReason::MissingField, -1, "missing text prompt field"};
    size_t pend = text.find('\n', ppos);
    if (pend == std::string::npos) pend = text.size();
    const std::string query = trim(text.substr(ppos + kPromptMarker.size(), pend - ppos - kPromptMarker.size()));
    if (query.empty())
        return RejectionReport{pair_id, RejectReason::MissingField, -1, "empty text prompt"};

    return ParsedDetour{*ts, win, query};
}

std::optional<RejectionReport> validate_detour(const DetourTuple& t, int dur_src, int dur_det) {
    const std::string pair_id = t.source_id + ":" + t.detour_id;
    if (t.t_s.seconds < 0 || t.t_s.seconds > dur_src)
        return RejectionReport{pair_id, RejectReason::OutOfRange, -1, "t_s outside source video"};
    if (t.window.start.seconds >= t.window.end.seconds)
        return RejectionReport{pair_id, RejectReason::OutOfRange, -1, "empty detour window"};
    if (t.window.start.seconds < 0 || t.window.end.seconds > dur_det)
        return RejectionReport{pair_id, RejectReason::OutOfRange, -1, "window outside detour video"};
    return std::nullopt;
}

} // namespace detours::parse
