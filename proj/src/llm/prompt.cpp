#include "llm/prompt.hpp"

#include "core/time.hpp"

#include <sstream>

namespace detours::llm {

const std::string kNarrationMarker = "Here are narrations with timestamps in HH:MM:ss format:";
const std::string kVideoAMarker = "Here are the recipes: Video A:\n";
const std::string kVideoBMarker = "\nand Video B:\n";

const char* role_name(Role r) {
    return r == Role::system ? "system" : "user";
}

std::string render_narration_block(const NarratedVideo& v) {
    std::ostringstream os;
    for (size_t i = 0; i < v.narrations.size(); ++i) {
        if (i) os << '\n';
        os << format_timestamp(v.narrations[i].t) << ' ' << v.narrations[i].text;
    }
    return os.str();
}

std::string render_summary_block(const VideoSummary& s) {
    std::ostringstream os;
    os << "Recipe: " << s.recipe;
    for (size_t i = 0; i < s.steps.size(); ++i) {
        os << "\nStep " << (i + 1) << ": [" << format_timestamp(s.steps[i].window.start) << " - "
           << format_timestamp(s.steps[i].window.end) << "] " << s.steps[i].text;
    }
    return os.str();
}

std::string render_detour_answer(Timestamp t_s, const TimeWindow& window,
                                 const std::string& query) {
    std::ostringstream os;
    os << "Detour time in Video A: " << format_timestamp(t_s)
       << ", Detour time window in Video B: [" << format_timestamp(window.start) << " - "
       << format_timestamp(window.end) << "], Detour text prompt: " << query;
    return os.str();
}

std::vector<ChatMessage> build_summary_prompt(const NarratedVideo& video) {
    if (video.narrations.empty()) throw EmptyNarrations(video.id);
    std::ostringstream user;
    user << "Given the narrations of a YouTube video, tell the recipe being made in this "
            "YouTube video and list down the steps and start and end timestamps in the video. "
            "Answer in this format: 'Recipe: Name of the recipe and brief detail\n"
            "Step 1: [HH:MM:ss - HH:MM:ss] description of the step\n"
            "Step 2: [HH:MM:ss - HH:MM:ss] description of the step\n"
            "and so on'. "
         << kNarrationMarker << '\n'
         << render_narration_block(video);
    return {{Role::system,
             "Help summarize the steps of this YouTube recipes whose narrations with timestamps "
             "are given. Timestamp is given in HH:MM:ss."},
            {Role::user, user.str()}};
}

std::vector<ChatMessage> build_detour_prompt(const VideoSummary& a, const VideoSummary& b) {
    if (a.steps.empty()) throw EmptySummary(a.video_id);
    if (b.steps.empty()) throw EmptySummary(b.video_id);
    std::ostringstream user;
    user << "There are two cooking videos A and B. The steps of the recipe along with timestamps "
            "in HH:MM:ss format is given. Suppose a person is watching video A, can you tell me "
            "what the user would prompt to take a detour and watch video B? The answer can be "
            "some extra/missing ingredients, tools or procedural step. Some examples of such "
            "queries can be 'How to do this step without adding yeast?', 'Can I add chilli powder "
            "here?', 'Can I do this step without blender?', 'Can you give a video that shows "
            "other way to roll a sushi?' and so on. Also, tell the time when the user would stop "
            "watching Video A and the time range in Video B and answers the user query. Answer in "
            "this format: 'Detour time in Video A: HH:MM:ss, Detour time window in Video B: "
            "[HH:MM:ss - HH:MM:ss], Detour text prompt: One sentence question a user would prompt "
            "to take a detour'. "
         << kVideoAMarker << render_summary_block(a) << kVideoBMarker << render_summary_block(b);
    return {{Role::system,
             "Help understand why a user would pause watching one video and take a detour to "
             "another cooking video."},
            {Role::user, user.str()}};
}

} // namespace detours::llm
