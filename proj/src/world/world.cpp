#include "world/world.hpp"

#include "core/io.hpp"

#include <algorithm>
#include <cmath>
#include <cctype>

namespace detours::world {

using nlohmann::json;

namespace {

const std::vector<std::string> kIngredients = {
    "onions",  "garlic", "butter",  "honey", "cheddar",   "basil", "paprika",
    "ginger",  "cream",  "yogurt",  "almonds", "raisins", "lemon", "chili",
    "mint",    "olives", "tofu",    "mushrooms", "spinach", "corn"};

const std::vector<std::string> kTools = {"blender", "whisk",     "spatula", "skillet",
                                         "steamer", "mixer",     "wok",     "griddle",
                                         "mandoline", "processor", "ricer",  "tongs"};

const std::vector<std::string> kTechniques = {"fold",  "knead", "simmer", "roast",
                                              "sear",  "braise", "toast",  "grate",
                                              "mash",  "julienne", "poach", "broil"};

const std::vector<std::string> kPresenceItems = {"parsley",   "sesame", "nutmeg",
                                                 "croutons",  "zest",   "glaze",
                                                 "frosting",  "pickles", "scallions",
                                                 "sprinkles"};

const std::string kPlain = "plain";

const std::vector<std::string> kStyles = {"classic", "spicy",  "quick",  "rustic",
                                          "creamy",  "smoky",  "golden", "hearty"};

const std::vector<std::string> kDishes = {
    "pancakes", "quesadillas", "lasagna", "smoothie", "curry",   "brownies", "omelette",
    "risotto",  "tacos",       "soup",    "flatbread", "dumplings", "muffins", "pizza",
    "burrito",  "stew",        "salad",   "crepes",   "waffles", "chowder"};

const std::vector<std::string>& axis_catalog(Axis a) {
    switch (a) {
        case Axis::ingredient: return kIngredients;
        case Axis::tool: return kTools;
        case Axis::technique: return kTechniques;
        case Axis::presence: return kPresenceItems;
    }
    return kIngredients;
}

const std::vector<std::string> kProps = {"bowl",  "tray",    "pot",   "sheet", "board",
                                         "rack",  "filling", "crust", "pan",   "dough"};

const std::vector<std::string> kOpeners = {"now",       "next up",  "then",      "at this point",
                                           "right after", "once ready", "meanwhile", "to continue"};

const std::vector<std::string> kNarrators = {
    "amara", "bruno", "carla",  "dmitri",  "elena",   "farid", "greta",   "hiro", "ivana",
    "jonas", "keiko", "luca",   "marisol", "nadia",   "otto",  "priya",   "quentin", "rosa",
    "stefan", "tamsin", "uri",  "vera",    "wendell", "ximena", "yusuf"};

// Each library step owns its own phrasing, so summaries of unrelated
// tasks overlap only through steps they genuinely share.
std::vector<std::string> verb_templates(Axis a) {
    switch (a) {
        case Axis::ingredient:
            return {"we add the {v} into the {prop}", "we mix some {v} through the {prop}",
                    "the {v} goes into the {prop}", "we stir the {v} around the {prop}"};
        case Axis::tool:
            return {"we use the {v} on the {prop}", "we work the {prop} with the {v}",
                    "the {v} helps shape the {prop}", "we run the {v} across the {prop}"};
        case Axis::technique:
            return {"we {v} the {prop} gently", "we {v} everything in the {prop}",
                    "we start to {v} the {prop}", "we {v} the whole {prop} well"};
        case Axis::presence:
            return {"we finish with some {v} over the {prop}", "a little {v} goes onto the {prop}",
                    "we top the {prop} with {v}", "we scatter {v} across the {prop}"};
    }
    return {};
}

std::string replace_all(std::string s, const std::string& from, const std::string& to) {
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos) {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::string render_narration(const LibraryStep& lib, const std::string& value,
                             const std::string& signature) {
    std::string body;
    if (lib.axis == Axis::presence && value == kPlain)
        body = lib.opener + " we keep the {prop} plain this time";
    else
        body = replace_all(lib.opener + " " + lib.narration_base, "{v}", value);
    return replace_all(body, "{prop}", lib.prop) + signature;
}

std::string task_signature(const TaskSpec& t) {
    const std::string dish = t.recipe.substr(t.recipe.find(' ') + 1);
    return " for " + t.narrator + "'s " + dish;
}

std::vector<std::string> query_templates(Axis axis, bool detour_is_plain) {
    switch (axis) {
        case Axis::ingredient:
            return {"can i use {v} instead here?", "what if i add {v} at this step?",
                    "is it ok to swap in {v} for this?", "could i try {v} for this part?"};
        case Axis::tool:
            return {"how to do this without a {u}?", "can i do this step without the {u}?",
                    "what can i use instead of the {u}?"};
        case Axis::technique:
            return {"is there a way to {v} this instead?", "can i just {v} it at this point?",
                    "how would i {v} this step here?"};
        case Axis::presence:
            if (detour_is_plain)
                return {"can i skip the {u} here?", "can i leave out the {u}?",
                        "is it fine without the {u}?"};
            return {"can i add some {v} here?", "what if i put {v} on at this step?"};
    }
    return {};
}

std::vector<float> random_unit(Rng& rng, int dim) {
    std::vector<float> v(static_cast<size_t>(dim));
    double norm = 0.0;
    for (auto& x : v) {
        x = static_cast<float>(rng.normal());
        norm += static_cast<double>(x) * x;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    for (auto& x : v) x = static_cast<float>(x / norm);
    return v;
}

// Deviation plan for a task's videos: which (slot, alternative) each
// video applies on top of the canonical assignment. slot ids: 0=a,1=b,2=c.
struct Deviation {
    int slot = -1; // -1 = canonical
    int alt = 0;   // 1-based index into the slot's alternatives
};

std::vector<Deviation> video_pattern(int videos, int test_count) {
    static const std::vector<Deviation> train_cycle = {
        {-1, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 2}};
    std::vector<Deviation> out;
    const int train = videos - test_count;
    for (int i = 0; i < train; ++i) out.push_back(train_cycle[static_cast<size_t>(i) % train_cycle.size()]);
    if (test_count >= 2) out.push_back({-1, 0});
    if (test_count >= 1) out.push_back({2, 1});
    return out;
}

} // namespace

const char* axis_name(Axis a) {
    switch (a) {
        case Axis::ingredient: return "ingredient";
        case Axis::tool: return "tool";
        case Axis::technique: return "technique";
        case Axis::presence: return "presence";
    }
    return "?";
}

Axis axis_from_name(const std::string& s) {
    if (s == "ingredient") return Axis::ingredient;
    if (s == "tool") return Axis::tool;
    if (s == "technique") return Axis::technique;
    if (s == "presence") return Axis::presence;
    throw FormatError("unknown axis: " + s);
}

void WorldConfig::validate() const {
    if (n_tasks < 2) throw ConfigError("world.n_tasks", "must be >= 2");
    if (videos_per_task < 2) throw ConfigError("world.videos_per_task", "must be >= 2");
    if (feature_dim < 4) throw ConfigError("world.feature_dim", "must be >= 4");
    if (noise_sigma < 0.0) throw ConfigError("world.noise_sigma", "must be >= 0");
    if (novel_task_fraction < 0.0 || novel_task_fraction >= 1.0)
        throw ConfigError("world.novel_task_fraction", "must be in [0, 1)");
    if (narration_drop_rate < 0.0 || narration_drop_rate > 1.0)
        throw ConfigError("world.narration_drop_rate", "must be in [0, 1]");
}

json WorldConfig::to_json() const {
    return json{{"n_tasks", n_tasks},
                {"videos_per_task", videos_per_task},
                {"feature_dim", feature_dim},
                {"noise_sigma", noise_sigma},
                {"seed", seed},
                {"novel_task_fraction", novel_task_fraction},
                {"narration_drop_rate", narration_drop_rate}};
}

WorldConfig WorldConfig::from_json(const json& j) {
    WorldConfig c;
    c.n_tasks = j.value("n_tasks", c.n_tasks);
    c.videos_per_task = j.value("videos_per_task", c.videos_per_task);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.seed = j.value("seed", c.seed);
    c.novel_task_fraction = j.value("novel_task_fraction", c.novel_task_fraction);
    c.narration_drop_rate = j.value("narration_drop_rate", c.narration_drop_rate);
    return c;
}

const NarratedVideo& World::video(const std::string& id) const {
    for (const auto& v : videos)
        if (v.id == id) return v;
    throw UnknownEntity("unknown video id: " + id);
}

bool World::has_video(const std::string& id) const {
    for (const auto& v : videos)
        if (v.id == id) return true;
    return false;
}

const TaskSpec& World::task(const std::string& id) const {
    for (const auto& t : tasks)
        if (t.task_id == id) return t;
    throw UnknownEntity("unknown task id: " + id);
}

std::vector<float> World::latent(const std::string& lib_id, const std::string& value) const {
    const auto su = step_dirs.find(lib_id);
    const auto sv = value_dirs.find(value);
    if (su == step_dirs.end()) throw UnknownEntity("unknown library step: " + lib_id);
    if (sv == value_dirs.end()) throw UnknownEntity("unknown variant value: " + value);
    std::vector<float> out(su->second.size());
    double norm = 0.0;
    for (size_t i = 0; i < out.size(); ++i) {
        out[i] = su->second[i] + sv->second[i];
        norm += static_cast<double>(out[i]) * out[i];
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    for (auto& x : out) x = static_cast<float>(x / norm);
    return out;
}

VideoSummary World::oracle_summary(const std::string& video_id) const {
    const auto it = video_steps.find(video_id);
    if (it == video_steps.end()) throw UnknownEntity("unknown video id: " + video_id);
    const NarratedVideo& v = video(video_id);
    const TaskSpec& t = task(v.task_id);
    VideoSummary s;
    s.video_id = video_id;
    s.recipe = t.recipe;
    for (const auto& st : it->second) {
        const LibraryStep* lib = nullptr;
        for (const auto& l : library)
            if (l.id == st.canonical_step_id) lib = &l;
        s.steps.push_back({make_window(st.start, st.start + st.duration),
                           render_narration(*lib, st.variant_value, task_signature(t))});
    }
    return s;
}

std::pair<std::vector<std::string>, std::vector<std::string>>
split_tasks(const std::vector<TaskSpec>& tasks, double novel_task_fraction, uint64_t seed) {
    if (novel_task_fraction < 0.0 || novel_task_fraction >= 1.0)
        throw ConfigError("world.novel_task_fraction", "must be in [0, 1)");
    const int n = static_cast<int>(tasks.size());
    int novel_count = static_cast<int>(std::lround(novel_task_fraction * n));
    novel_count = std::min(novel_count, n - 1);
    std::vector<int> idx(tasks.size());
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
    Rng rng = derive_rng(seed, "task-split");
    for (int i = n - 1; i > 0; --i) std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(rng.uniform_int(i + 1))]);
    std::vector<std::string> common, novel;
    for (int i = 0; i < n; ++i) {
        if (i < novel_count)
            novel.push_back(tasks[static_cast<size_t>(idx[static_cast<size_t>(i)])].task_id);
        else
            common.push_back(tasks[static_cast<size_t>(idx[static_cast<size_t>(i)])].task_id);
    }
    std::sort(common.begin(), common.end());
    std::sort(novel.begin(), novel.end());
    return {common, novel};
}

World gen_world(const WorldConfig& cfg) {
    cfg.validate();
    World w;
    w.cfg = cfg;

    // Library of reusable steps; tasks share them, which is what lets a
    // model trained on common tasks transfer to novel ones. Sized with the
    // task count so unrelated tasks rarely share more than one step.
    const int n_lib = std::max(12, cfg.n_tasks);
    {
        Rng rng = derive_rng(cfg.seed, "library");
        for (int i = 0; i < n_lib; ++i) {
            LibraryStep lib;
            char buf[16];
            std::snprintf(buf, sizeof(buf), "s%02d", i);
            lib.id = buf;
            lib.axis = static_cast<Axis>(i % 4);
            const auto bases = verb_templates(lib.axis);
            lib.opener = kOpeners[static_cast<size_t>(rng.uniform_int(static_cast<int>(kOpeners.size())))];
            lib.narration_base = bases[static_cast<size_t>(rng.uniform_int(static_cast<int>(bases.size())))];
            lib.prop = kProps[static_cast<size_t>(rng.uniform_int(static_cast<int>(kProps.size())))];
            const auto& catalog = axis_catalog(lib.axis);
            if (lib.axis == Axis::presence) {
                lib.values = {catalog[static_cast<size_t>(rng.uniform_int(static_cast<int>(catalog.size())))], kPlain};
            } else {
                std::vector<int> pick(catalog.size());
                for (size_t j = 0; j < pick.size(); ++j) pick[j] = static_cast<int>(j);
                for (int j = static_cast<int>(pick.size()) - 1; j > 0; --j)
                    std::swap(pick[static_cast<size_t>(j)], pick[static_cast<size_t>(rng.uniform_int(j + 1))]);
                for (int j = 0; j < 3; ++j) lib.values.push_back(catalog[static_cast<size_t>(pick[static_cast<size_t>(j)])]);
            }
            w.library.push_back(std::move(lib));
        }
    }

    // Latent directions for steps and for every value any step can take.
    for (const auto& lib : w.library) {
        Rng r1 = derive_rng(cfg.seed, "dir:step:" + lib.id);
        w.step_dirs[lib.id] = random_unit(r1, cfg.feature_dim);
        for (const auto& v : lib.values) {
            if (w.value_dirs.count(v)) continue;
            Rng r2 = derive_rng(cfg.seed, "dir:value:" + v);
            w.value_dirs[v] = random_unit(r2, cfg.feature_dim);
        }
    }

    // Tasks: a recipe name plus an ordered pick of library steps; three
    // of them become variant slots (a: two alternatives, b, c: one or two).
    for (int ti = 0; ti < cfg.n_tasks; ++ti) {
        Rng rng = derive_rng(cfg.seed, "task:" + std::to_string(ti));
        TaskSpec task;
        char buf[16];
        std::snprintf(buf, sizeof(buf), "task%03d", ti);
        task.task_id = buf;
        task.recipe = kStyles[static_cast<size_t>((ti / kDishes.size()) % kStyles.size())] + " " +
                      kDishes[static_cast<size_t>(ti) % kDishes.size()];
        task.narrator = kNarrators[static_cast<size_t>(ti) % kNarrators.size()];

        const int n_steps = 4 + rng.uniform_int(3);
        std::vector<int> order(static_cast<size_t>(n_lib));
        for (size_t j = 0; j < order.size(); ++j) order[j] = static_cast<int>(j);
        std::vector<int> chosen;
        while (true) {
            for (int j = n_lib - 1; j > 0; --j)
                std::swap(order[static_cast<size_t>(j)], order[static_cast<size_t>(rng.uniform_int(j + 1))]);
            chosen.assign(order.begin(), order.begin() + n_steps);
            // variant slots live at indices >= 1 (a detour is always asked
            // after some context), so at least one later step must have a
            // rich enough pool for slot a
            int non_presence_late = 0;
            for (size_t ci = 1; ci < chosen.size(); ++ci)
                if (w.library[static_cast<size_t>(chosen[ci])].axis != Axis::presence)
                    ++non_presence_late;
            if (non_presence_late >= 1) break;
        }

        for (int c : chosen) {
            const auto& lib = w.library[static_cast<size_t>(c)];
            TaskStep st;
            st.lib_id = lib.id;
            st.axis = lib.axis;
            const int canon = rng.uniform_int(static_cast<int>(lib.values.size()));
            st.canonical = lib.values[static_cast<size_t>(canon)];
            st.allowed = {st.canonical};
            task.steps.push_back(std::move(st));
        }

        // slot a needs two alternatives, so it must sit on a step whose
        // pool has at least three values; no slot sits on step 0
        std::vector<int> rich, any;
        for (int si = 1; si < n_steps; ++si) {
            const auto& lib = w.library[static_cast<size_t>(chosen[static_cast<size_t>(si)])];
            if (lib.values.size() >= 3) rich.push_back(si);
            any.push_back(si);
        }
        const int slot_a = rich[static_cast<size_t>(rng.uniform_int(static_cast<int>(rich.size())))];
        int slot_b = slot_a, slot_c = slot_a;
        while (slot_b == slot_a)
            slot_b = any[static_cast<size_t>(rng.uniform_int(static_cast<int>(any.size())))];
        while (slot_c == slot_a || slot_c == slot_b)
            slot_c = any[static_cast<size_t>(rng.uniform_int(static_cast<int>(any.size())))];

        const std::vector<int> slots = {slot_a, slot_b, slot_c};
        for (int si : slots) {
            auto& st = task.steps[static_cast<size_t>(si)];
            const auto& lib = w.library[static_cast<size_t>(chosen[static_cast<size_t>(si)])];
            st.allowed = {st.canonical};
            for (const auto& v : lib.values)
                if (v != st.canonical) st.allowed.push_back(v);
        }
        w.tasks.push_back(std::move(task));

        const int test_count = cfg.videos_per_task >= 4 ? 2 : 1;
        const auto pattern = video_pattern(cfg.videos_per_task, test_count);

        for (int vi = 0; vi < cfg.videos_per_task; ++vi) {
            char vbuf[24];
            std::snprintf(vbuf, sizeof(vbuf), "%s_v%d", w.tasks.back().task_id.c_str(), vi);
            NarratedVideo video;
            video.id = vbuf;
            video.task_id = w.tasks.back().task_id;
            Rng vrng = derive_rng(cfg.seed, "video:" + video.id);

            const Deviation dev = pattern[static_cast<size_t>(vi)];
            std::vector<StepSpec> steps;
            int t0 = 0;
            for (int si = 0; si < n_steps; ++si) {
                const auto& ts = w.tasks.back().steps[static_cast<size_t>(si)];
                StepSpec sp;
                sp.canonical_step_id = ts.lib_id;
                sp.axis = ts.axis;
                sp.variant_value = ts.canonical;
                const int slot = (si == slots[0]) ? 0 : (si == slots[1]) ? 1 : (si == slots[2]) ? 2 : -1;
                if (slot == dev.slot && dev.slot >= 0) {
                    const auto& allowed = ts.allowed;
                    const size_t alt = std::min<size_t>(static_cast<size_t>(dev.alt), allowed.size() - 1);
                    sp.variant_value = allowed[alt];
                }
                sp.duration = 5 + vrng.uniform_int(6);
                sp.start = t0;
                t0 += sp.duration;
                steps.push_back(std::move(sp));
            }
            video.duration = t0;

            for (const auto& sp : steps) {
                if (cfg.narration_drop_rate > 0.0 && vrng.bernoulli(cfg.narration_drop_rate)) continue;
                const LibraryStep* lib = nullptr;
                for (const auto& l : w.library)
                    if (l.id == sp.canonical_step_id) lib = &l;
                video.narrations.push_back(
                    {Timestamp{sp.start},
                     render_narration(*lib, sp.variant_value, task_signature(w.tasks.back()))});
            }

            video.features = Mat32(video.duration, cfg.feature_dim);
            for (const auto& sp : steps) {
                const auto lat = w.latent(sp.canonical_step_id, sp.variant_value);
                for (int s = sp.start; s < sp.start + sp.duration; ++s) {
                    float* row = video.features.row(s);
                    for (int dcol = 0; dcol < cfg.feature_dim; ++dcol)
                        row[dcol] = lat[static_cast<size_t>(dcol)] +
                                    static_cast<float>(vrng.normal() * cfg.noise_sigma);
                }
            }

            w.video_steps[video.id] = std::move(steps);
            w.videos.push_back(std::move(video));
        }

        // Split videos: the last test_count videos of every task are
        // held out; novel-task videos all land in test below.
        for (int vi = 0; vi < cfg.videos_per_task; ++vi) {
            char vbuf[24];
            std::snprintf(vbuf, sizeof(vbuf), "%s_v%d", w.tasks.back().task_id.c_str(), vi);
            if (vi >= cfg.videos_per_task - test_count)
                w.test_videos.insert(vbuf);
            else
                w.train_videos.insert(vbuf);
        }
    }

    auto [common, novel] = split_tasks(w.tasks, cfg.novel_task_fraction, cfg.seed);
    w.common_tasks = common;
    w.novel_tasks = novel;
    const std::set<std::string> novel_set(novel.begin(), novel.end());
    for (const auto& v : w.videos) {
        if (novel_set.count(v.task_id)) {
            w.train_videos.erase(v.id);
            w.test_videos.insert(v.id);
        }
    }

    // Ground truth: every ordered same-task pair differing at exactly one
    // step yields one detour tuple.
    for (const auto& task : w.tasks) {
        std::vector<const NarratedVideo*> vids;
        for (const auto& v : w.videos)
            if (v.task_id == task.task_id) vids.push_back(&v);
        for (const auto* a : vids) {
            for (const auto* b : vids) {
                if (a == b) continue;
                const auto& sa = w.video_steps.at(a->id);
                const auto& sb = w.video_steps.at(b->id);
                int diff = -1, diffs = 0;
                for (size_t si = 0; si < sa.size(); ++si) {
                    if (sa[si].variant_value != sb[si].variant_value) {
                        diff = static_cast<int>(si);
                        ++diffs;
                    }
                }
                if (diffs != 1) continue;
                const auto& src = sa[static_cast<size_t>(diff)];
                const auto& det = sb[static_cast<size_t>(diff)];
                Rng trng = derive_rng(w.cfg.seed, "tuple:" + a->id + ":" + b->id);
                const bool detour_plain = det.variant_value == kPlain;
                const auto templates = query_templates(det.axis, detour_plain);
                std::string q = templates[static_cast<size_t>(trng.uniform_int(static_cast<int>(templates.size())))];
                q = replace_all(q, "{v}", det.variant_value);
                q = replace_all(q, "{u}", src.variant_value);

                GtTuple gt;
                gt.tuple.source_id = a->id;
                gt.tuple.t_s = Timestamp{src.start};
                gt.tuple.query = q;
                gt.tuple.detour_id = b->id;
                gt.tuple.window = make_window(det.start, det.start + det.duration);
                gt.axis = det.axis;
                gt.value = det.variant_value;
                gt.task_id = task.task_id;
                const bool a_train = w.train_videos.count(a->id) > 0;
                const bool b_train = w.train_videos.count(b->id) > 0;
                gt.split = (a_train && b_train) ? "train" : (!a_train && !b_train) ? "test" : "mixed";
                w.gt.push_back(std::move(gt));
            }
        }
    }

    return w;
}

void save_world(const World& w, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    save_videos(dir, w.videos);

    json meta;
    meta["config"] = w.cfg.to_json();
    json lib = json::array();
    for (const auto& l : w.library)
        lib.push_back({{"id", l.id},
                       {"axis", axis_name(l.axis)},
                       {"narration_base", l.narration_base},
                       {"opener", l.opener},
                       {"prop", l.prop},
                       {"values", l.values}});
    meta["library"] = lib;
    json tasks = json::array();
    for (const auto& t : w.tasks) {
        json steps = json::array();
        for (const auto& s : t.steps)
            steps.push_back({{"lib_id", s.lib_id},
                             {"axis", axis_name(s.axis)},
                             {"canonical", s.canonical},
                             {"allowed", s.allowed}});
        tasks.push_back({{"task_id", t.task_id},
                         {"recipe", t.recipe},
                         {"narrator", t.narrator},
                         {"steps", steps}});
    }
    meta["tasks"] = tasks;
    json vsteps;
    for (const auto& [vid, steps] : w.video_steps) {
        json arr = json::array();
        for (const auto& s : steps)
            arr.push_back({{"lib_id", s.canonical_step_id},
                           {"axis", axis_name(s.axis)},
                           {"value", s.variant_value},
                           {"start", s.start},
                           {"duration", s.duration}});
        vsteps[vid] = arr;
    }
    meta["video_steps"] = vsteps;
    meta["splits"] = {{"common_tasks", w.common_tasks},
                      {"novel_tasks", w.novel_tasks},
                      {"train_videos", std::vector<std::string>(w.train_videos.begin(), w.train_videos.end())},
                      {"test_videos", std::vector<std::string>(w.test_videos.begin(), w.test_videos.end())}};
    meta["step_dirs"] = w.step_dirs;
    meta["value_dirs"] = w.value_dirs;
    write_text_file(dir / "world_meta.json", meta.dump(2) + "\n");

    std::vector<json> gts;
    for (const auto& g : w.gt) {
        json j = tuple_to_json(g.tuple);
        j["axis"] = axis_name(g.axis);
        j["value"] = g.value;
        j["task_id"] = g.task_id;
        j["split"] = g.split;
        gts.push_back(std::move(j));
    }
    write_jsonl(dir / "gt_detours.jsonl", gts);
}

World load_world(const std::filesystem::path& dir) {
    World w;
    w.videos = load_videos(dir);
    const json meta = json::parse(read_text_file(dir / "world_meta.json"));
    w.cfg = WorldConfig::from_json(meta.at("config"));
    for (const auto& l : meta.at("library")) {
        LibraryStep lib;
        lib.id = l.at("id").get<std::string>();
        lib.axis = axis_from_name(l.at("axis").get<std::string>());
        lib.narration_base = l.at("narration_base").get<std::string>();
        lib.opener = l.value("opener", "");
        lib.prop = l.value("prop", "");
        lib.values = l.at("values").get<std::vector<std::string>>();
        w.library.push_back(std::move(lib));
    }
    for (const auto& t : meta.at("tasks")) {
        TaskSpec task;
        task.task_id = t.at("task_id").get<std::string>();
        task.recipe = t.at("recipe").get<std::string>();
        task.narrator = t.value("narrator", "");
        for (const auto& s : t.at("steps")) {
            TaskStep st;
            st.lib_id = s.at("lib_id").get<std::string>();
            st.axis = axis_from_name(s.at("axis").get<std::string>());
            st.canonical = s.at("canonical").get<std::string>();
            st.allowed = s.at("allowed").get<std::vector<std::string>>();
            task.steps.push_back(std::move(st));
        }
        w.tasks.push_back(std::move(task));
    }
    for (const auto& [vid, arr] : meta.at("video_steps").items()) {
        std::vector<StepSpec> steps;
        for (const auto& s : arr) {
            StepSpec sp;
            sp.canonical_step_id = s.at("lib_id").get<std::string>();
            sp.axis = axis_from_name(s.at("axis").get<std::string>());
            sp.variant_value = s.at("value").get<std::string>();
            sp.start = s.at("start").get<int>();
            sp.duration = s.at("duration").get<int>();
            steps.push_back(std::move(sp));
        }
        w.video_steps[vid] = std::move(steps);
    }
    const auto& splits = meta.at("splits");
    w.common_tasks = splits.at("common_tasks").get<std::vector<std::string>>();
    w.novel_tasks = splits.at("novel_tasks").get<std::vector<std::string>>();
    for (const auto& v : splits.at("train_videos")) w.train_videos.insert(v.get<std::string>());
    for (const auto& v : splits.at("test_videos")) w.test_videos.insert(v.get<std::string>());
    for (const auto& [k, v] : meta.at("step_dirs").items())
        w.step_dirs[k] = v.get<std::vector<float>>();
    for (const auto& [k, v] : meta.at("value_dirs").items())
        w.value_dirs[k] = v.get<std::vector<float>>();
    for (const auto& j : read_jsonl(dir / "gt_detours.jsonl")) {
        GtTuple g;
        g.tuple = tuple_from_json(j);
        g.axis = axis_from_name(j.at("axis").get<std::string>());
        g.value = j.at("value").get<std::string>();
        g.task_id = j.at("task_id").get<std::string>();
        g.split = j.at("split").get<std::string>();
        w.gt.push_back(std::move(g));
    }
    return w;
}

std::vector<double> AlignedEmbedder::embed_video(const NarratedVideo& v) const {
    return embed_window(v, make_window(0, v.duration));
}

std::vector<double> AlignedEmbedder::embed_window(const NarratedVideo& v,
                                                  const TimeWindow& win) const {
    if (!win.valid() || win.end.seconds > v.duration)
        throw UnknownEntity("window outside video " + v.id);
    std::vector<double> acc(static_cast<size_t>(v.features.cols), 0.0);
    for (int s = win.start.seconds; s < win.end.seconds; ++s) {
        const float* row = v.features.row(s);
        for (size_t d = 0; d < acc.size(); ++d) acc[d] += row[d];
    }
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(std::max(norm, 1e-12));
    for (auto& x : acc) x /= norm;
    return acc;
}

std::vector<double> AlignedEmbedder::embed_query(const std::string& query) const {
    std::set<std::string> tokens;
    std::string cur;
    for (char c : query + " ") {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            tokens.insert(cur);
            cur.clear();
        }
    }
    std::vector<double> acc(static_cast<size_t>(world_.cfg.feature_dim), 0.0);
    int hits = 0;
    for (const auto& lib : world_.library) {
        for (const auto& val : lib.values) {
            if (!tokens.count(val)) continue;
            const auto lat = world_.latent(lib.id, val);
            for (size_t d = 0; d < acc.size(); ++d) acc[d] += static_cast<double>(lat[d]);
            ++hits;
        }
    }
    if (hits == 0) throw UnknownEntity("query mentions no catalog entity: " + query);
    double norm = 0.0;
    for (double x : acc) norm += x * x;
    norm = std::sqrt(std::max(norm, 1e-12));
    for (auto& x : acc) x /= norm;
    return acc;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::max(std::sqrt(na) * std::sqrt(nb), 1e-12);
}

} // namespace detours::world
