#include "model/checkpoint.hpp"

#include "core/errors.hpp"
#include "core/io.hpp"

namespace detours::model {

using nlohmann::json;

void save_model(const DetourModel<float>& m, const Vocab& vocab,
                const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    std::vector<tad::TensorRecord> recs;
    for (const auto& [name, p] : m.named_params())
        recs.push_back(tad::TensorRecord::from(name, p->value));
    tad::write_dtck(dir / "model.dtck", recs);
    write_text_file(dir / "vocab.json", vocab.to_json().dump() + "\n");
    write_text_file(dir / "config.json", m.cfg.to_json().dump(2) + "\n");
}

std::pair<DetourModel<float>, Vocab> load_model(const std::filesystem::path& dir) {
    const ModelConfig cfg = ModelConfig::from_json(json::parse(read_text_file(dir / "config.json")));
    Vocab vocab = Vocab::from_json(json::parse(read_text_file(dir / "vocab.json")));
    DetourModel<float> m = DetourModel<float>::init(cfg, 0);
    std::map<std::string, tad::TensorRecord> by_name;
    for (auto& r : tad::read_dtck(dir / "model.dtck")) by_name[r.name] = std::move(r);
    for (auto& [name, p] : m.named_params()) {
        const auto it = by_name.find(name);
        if (it == by_name.end()) throw FormatError("checkpoint missing tensor '" + name + "'");
        tad::Tensor<float> t = it->second.as_f32();
        if (t.shape != p->value.shape)
            throw FormatError("checkpoint tensor '" + name + "' has shape " +
                              tad::shape_str(t.shape) + ", expected " +
                              tad::shape_str(p->value.shape));
        p->value = std::move(t);
    }
    return {std::move(m), std::move(vocab)};
}

void save_train_state(const std::filesystem::path& dir, const TrainState& st,
                      tad::AdamW<float>& opt) {
    std::vector<tad::TensorRecord> recs;
    auto& m = opt.first_moments();
    auto& v = opt.second_moments();
    for (size_t i = 0; i < m.size(); ++i) {
        recs.push_back(tad::TensorRecord::from("m" + std::to_string(i), m[i]));
        recs.push_back(tad::TensorRecord::from("v" + std::to_string(i), v[i]));
    }
    tad::write_dtck(dir / "optim.dtck", recs);
    write_text_file(dir / "train_state.json",
                    json{{"epoch", st.epoch},
                         {"rng_state", st.rng_state},
                         {"optimizer_steps", st.optimizer_steps}}
                            .dump() +
                        "\n");
}

std::optional<TrainState> load_train_state(const std::filesystem::path& dir,
                                           tad::AdamW<float>* opt,
                                           const std::vector<tad::Var<float>>& params) {
    if (!std::filesystem::exists(dir / "train_state.json")) return std::nullopt;
    const json j = json::parse(read_text_file(dir / "train_state.json"));
    TrainState st;
    st.epoch = j.at("epoch").get<int>();
    st.rng_state = j.at("rng_state").get<uint64_t>();
    st.optimizer_steps = j.at("optimizer_steps").get<int64_t>();
    if (opt) {
        std::vector<tad::Tensor<float>> m, v;
        std::map<std::string, tad::TensorRecord> by_name;
        for (auto& r : tad::read_dtck(dir / "optim.dtck")) by_name[r.name] = std::move(r);
        for (size_t i = 0; i < params.size(); ++i) {
            m.push_back(by_name.at("m" + std::to_string(i)).as_f32());
            v.push_back(by_name.at("v" + std::to_string(i)).as_f32());
        }
        opt->restore(std::move(m), std::move(v), st.optimizer_steps);
    }
    return st;
}

} // namespace detours::model
