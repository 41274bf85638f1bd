#pragma once

#include "core/errors.hpp"

#include <json.hpp>

namespace detours::model {

struct HeadConfig {
    int input_dim = 0; // 0: reuse the encoder width
    int layers = 2;
    int heads = 4;
    int ffn_dim = 128;
};

struct ModelConfig {
    int d_model = 64;
    int n_heads = 4;
    int n_layers = 2;
    int ffn_dim = 128;
    int max_seq = 512;
    int feature_dim = 32;
    int vocab_size = 0; // filled when the vocab is built
    HeadConfig retrieval_head;
    bool bidirectional_encoder = false; // ablation flag; causal by default
    int max_candidate_stride = 8;
    double init_std = 0.08;
    bool identity_attention_init = true; // q/k/v start as similarity routers

    int head_dim() const { return retrieval_head.input_dim > 0 ? retrieval_head.input_dim : d_model; }

    void validate() const {
        if (d_model <= 0 || d_model % n_heads != 0)
            throw ConfigError("model.d_model", "must be positive and divisible by n_heads");
        if (head_dim() % retrieval_head.heads != 0)
            throw ConfigError("model.retrieval_head.heads", "must divide the head input dim");
        if (n_layers <= 0) throw ConfigError("model.n_layers", "must be >= 1");
        if (max_seq < 8) throw ConfigError("model.max_seq", "must be >= 8");
        if (feature_dim <= 0) throw ConfigError("model.feature_dim", "must be >= 1");
        if (max_candidate_stride < 1)
            throw ConfigError("model.max_candidate_stride", "must be >= 1");
        if (init_std <= 0.0) throw ConfigError("model.init_std", "must be > 0");
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"d_model", d_model},
                              {"n_heads", n_heads},
                              {"n_layers", n_layers},
                              {"ffn_dim", ffn_dim},
                              {"max_seq", max_seq},
                              {"feature_dim", feature_dim},
                              {"vocab_size", vocab_size},
                              {"retrieval_head",
                               {{"input_dim", retrieval_head.input_dim},
                                {"layers", retrieval_head.layers},
                                {"heads", retrieval_head.heads},
                                {"ffn_dim", retrieval_head.ffn_dim}}},
                              {"bidirectional_encoder", bidirectional_encoder},
                              {"max_candidate_stride", max_candidate_stride},
                              {"init_std", init_std},
                              {"identity_attention_init", identity_attention_init}};
    }

    static ModelConfig from_json(const nlohmann::json& j) {
        ModelConfig c;
        c.d_model = j.value("d_model", c.d_model);
        c.n_heads = j.value("n_heads", c.n_heads);
        c.n_layers = j.value("n_layers", c.n_layers);
        c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
        c.max_seq = j.value("max_seq", c.max_seq);
        c.feature_dim = j.value("feature_dim", c.feature_dim);
        c.vocab_size = j.value("vocab_size", c.vocab_size);
        if (j.contains("retrieval_head")) {
            const auto& h = j.at("retrieval_head");
            c.retrieval_head.input_dim = h.value("input_dim", c.retrieval_head.input_dim);
            c.retrieval_head.layers = h.value("layers", c.retrieval_head.layers);
            c.retrieval_head.heads = h.value("heads", c.retrieval_head.heads);
            c.retrieval_head.ffn_dim = h.value("ffn_dim", c.retrieval_head.ffn_dim);
        }
        c.bidirectional_encoder = j.value("bidirectional_encoder", c.bidirectional_encoder);
        c.max_candidate_stride = j.value("max_candidate_stride", c.max_candidate_stride);
        c.init_std = j.value("init_std", c.init_std);
        c.identity_attention_init = j.value("identity_attention_init", c.identity_attention_init);
        c.validate();
        return c;
    }

    // Laptop-scale defaults: trains in minutes on one core.
    static ModelConfig desk_default() { return ModelConfig{}; }

    // Reference values of the published full-scale retrieval head; kept as
    // a preset for documentation, far too large to train here.
    static ModelConfig full_scale_reference() {
        ModelConfig c;
        c.d_model = 4096;
        c.n_heads = 32;
        c.n_layers = 4;
        c.ffn_dim = 11008;
        c.max_seq = 4096;
        c.retrieval_head = HeadConfig{4096, 4, 4, 1024};
        return c;
    }
};

} // namespace detours::model
