#pragma once

#include "core/time.hpp"

#include <string>
#include <vector>

namespace detours {

// Dense row-major float matrix; the per-second feature store.
struct Mat32 {
    int rows = 0;
    int cols = 0;
    std::vector<float> data;

    Mat32() = default;
    Mat32(int r, int c) : rows(r), cols(c), data(static_cast<size_t>(r) * c, 0.0f) {}

    float* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const float* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }
    float& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    float at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }
};

struct Narration {
    Timestamp t;
    std::string text;
};

// A procedure video: metadata plus one feature row per second.
// Narrations are kept sorted by time; features.rows == duration.
struct NarratedVideo {
    std::string id;
    std::string task_id;
    int duration = 0; // seconds
    std::vector<Narration> narrations;
    Mat32 features;
};

// The supervision and evaluation record: pause source at t_s, ask query,
// jump to window inside the detour video.
struct DetourTuple {
    std::string source_id;
    Timestamp t_s;
    std::string query;
    std::string detour_id;
    TimeWindow window;
};

// LLM-parsed intermediate: recipe title plus ordered timestamped steps.
struct SummaryStep {
    TimeWindow window;
    std::string text;
};

struct VideoSummary {
    std::string video_id;
    std::string recipe;
    std::vector<SummaryStep> steps;
};

} // namespace detours
