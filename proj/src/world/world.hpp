#pragma once

#include "core/errors.hpp"
#include "core/rng.hpp"
#include "core/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace detours::world {

class UnknownEntity : public std::runtime_error {
public:
    explicit UnknownEntity(const std::string& what) : std::runtime_error(what) {}
};

enum class Axis { ingredient, tool, technique, presence };

const char* axis_name(Axis a);
Axis axis_from_name(const std::string& s);

// A reusable procedure step shared across tasks ("add the sweetener",
// "work the dough"). Each carries the variant axis it can differ on and
// a pool of values, values[0] being the canonical choice.
struct LibraryStep {
    std::string id;
    Axis axis = Axis::ingredient;
    std::string opener;         // step-specific sentence opener
    std::string narration_base; // with {v} and {prop} slots
    std::string prop;           // the vessel/scaffold noun this step talks about
    std::vector<std::string> values;
};

// One step of one concrete video.
struct StepSpec {
    std::string canonical_step_id; // library step id
    Axis axis = Axis::ingredient;
    std::string variant_value;
    int duration = 0;
    int start = 0; // second offset within the video
};

struct TaskStep {
    std::string lib_id;
    Axis axis = Axis::ingredient;
    std::string canonical;
    std::vector<std::string> allowed;
};

struct TaskSpec {
    std::string task_id;
    std::string recipe;
    std::string narrator; // every narration carries the narrator + dish signature
    std::vector<TaskStep> steps;
};

struct WorldConfig {
    int n_tasks = 40;
    int videos_per_task = 6;
    int feature_dim = 32;
    double noise_sigma = 0.3;
    uint64_t seed = 7;
    double novel_task_fraction = 0.25;
    double narration_drop_rate = 0.0; // robustness-test knob

    void validate() const;
    nlohmann::json to_json() const;
    static WorldConfig from_json(const nlohmann::json& j);
};

// A ground-truth detour with the generating variant attached.
struct GtTuple {
    DetourTuple tuple;
    Axis axis = Axis::ingredient;
    std::string value; // the variant the detour window exhibits
    std::string task_id;
    std::string split; // train / test / mixed
};

struct World {
    WorldConfig cfg;
    std::vector<LibraryStep> library;
    std::vector<TaskSpec> tasks;
    std::vector<NarratedVideo> videos;
    std::vector<GtTuple> gt;
    std::map<std::string, std::vector<StepSpec>> video_steps;
    std::vector<std::string> common_tasks;
    std::vector<std::string> novel_tasks;
    std::set<std::string> train_videos;
    std::set<std::string> test_videos;
    // Unit directions composing the per-(step, variant) feature latents.
    std::map<std::string, std::vector<float>> step_dirs;
    std::map<std::string, std::vector<float>> value_dirs;

    const NarratedVideo& video(const std::string& id) const;
    const TaskSpec& task(const std::string& id) const;
    bool has_video(const std::string& id) const;

    // latent(step, value) = normalize(u_step + v_value)
    std::vector<float> latent(const std::string& lib_id, const std::string& value) const;

    // Ground-truth summary rendered from the step layout; the offline
    // LLM backend and the parser round-trip tests both build on this.
    VideoSummary oracle_summary(const std::string& video_id) const;
};

World gen_world(const WorldConfig& cfg);

// Deterministic task partition; novel tasks never contribute training
// tuples. Returned as (common, novel).
std::pair<std::vector<std::string>, std::vector<std::string>>
split_tasks(const std::vector<TaskSpec>& tasks, double novel_task_fraction, uint64_t seed);

void save_world(const World& w, const std::filesystem::path& dir);
World load_world(const std::filesystem::path& dir);

// Shared text/video embedding oracle standing in for a pretrained
// dual-encoder; used by the late-fusion baselines.
class AlignedEmbedder {
public:
    explicit AlignedEmbedder(const World& w) : world_(w) {}

    std::vector<double> embed_query(const std::string& query) const;
    std::vector<double> embed_video(const NarratedVideo& v) const;
    std::vector<double> embed_window(const NarratedVideo& v, const TimeWindow& w) const;

private:
    const World& world_;
};

double cosine(const std::vector<double>& a, const std::vector<double>& b);

} // namespace detours::world
