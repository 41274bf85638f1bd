#pragma once

#include "core/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace detours::parse {

// Rejection is data, not failure: a batch run over a corpus always
// completes and counts its rejects.
enum class RejectReason { NoParse, BadTimestamp, LowCoverage, OutOfRange, MissingField };

const char* reject_reason_name(RejectReason r);
RejectReason reject_reason_from_name(const std::string& s);

struct RejectionReport {
    std::string id; // video id or pair id
    RejectReason reason = RejectReason::NoParse;
    int line = -1; // offending line index, -1 when not line-specific
    std::string detail;
};

nlohmann::json reject_to_json(const RejectionReport& r);

using SummaryResult = std::variant<VideoSummary, RejectionReport>;

// Extracts the "Recipe:" line and every "Step k: [A - B] desc" line.
// Non-matching lines are skipped as prose as long as at least one step
// parses; a structurally step-shaped line with malformed timestamps
// rejects the whole completion (BadTimestamp, offending line recorded).
SummaryResult parse_summary(const std::string& text, const std::string& video_id);

// Accept iff every window lies inside [0, duration] and the union of the
// step windows covers at least 80% of it. Overlaps never double-count.
std::optional<RejectionReport> validate_summary(const VideoSummary& s, int duration);

struct ParsedDetour {
    Timestamp t_s;
    TimeWindow window;
    std::string query;
};

using DetourResult = std::variant<ParsedDetour, RejectionReport>;

// The three answer fields are mandatory; surrounding prose is tolerated.
DetourResult parse_detour(const std::string& text, const std::string& pair_id);

std::optional<RejectionReport> validate_detour(const DetourTuple& t, int dur_src, int dur_det);

// Total length of the union of (possibly overlapping) windows.
int union_length(const std::vector<TimeWindow>& windows);

} // namespace detours::parse
