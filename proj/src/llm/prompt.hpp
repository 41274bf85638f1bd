#pragma once

#include "core/types.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace detours::llm {

class EmptyNarrations : public std::runtime_error {
public:
    explicit EmptyNarrations(const std::string& id)
        : std::runtime_error("video has no narrations: " + id) {}
};

class EmptySummary : public std::runtime_error {
public:
    explicit EmptySummary(const std::string& id)
        : std::runtime_error("summary has no steps: " + id) {}
};

enum class Role { system, user };

struct ChatMessage {
    Role role = Role::user;
    std::string content;

    friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

const char* role_name(Role r);

// "HH:MM:SS text" lines in temporal order.
std::string render_narration_block(const NarratedVideo& v);

// "Recipe: ...\nStep 1: [A - B] desc\n..." — the exact grammar the
// parsers accept and the offline backend emits.
std::string render_summary_block(const VideoSummary& s);

// One-line detour answer in the canonical field order.
std::string render_detour_answer(Timestamp t_s, const TimeWindow& window,
                                 const std::string& query);

std::vector<ChatMessage> build_summary_prompt(const NarratedVideo& video);
std::vector<ChatMessage> build_detour_prompt(const VideoSummary& a, const VideoSummary& b);

// Markers the offline backend keys on when matching prompts back to
// world entities.
extern const std::string kNarrationMarker;
extern const std::string kVideoAMarker;
extern const std::string kVideoBMarker;

} // namespace detours::llm
