#pragma once

#include "tad/ops.hpp"

#include <string>
#include <utility>
#include <vector>

namespace detours::tad {

template <class S>
using NamedParams = std::vector<std::pair<std::string, Var<S>>>;

template <class S>
struct Linear {
    Var<S> w; // [in x out]
    Var<S> b; // [out]

    Linear() = default;
    Linear(int in, int out, Rng& rng, double init_std = 0.02) {
        w = make_leaf(Tensor<S>::randn({in, out}, rng, init_std), true);
        b = make_leaf(Tensor<S>::zeros({out}), true);
    }

    // identity (plus small noise) on the leading square block; attention
    // projections initialized this way route by raw feature similarity
    // from the first step
    static Linear eye(int in, int out, Rng& rng, double scale, double noise_std) {
        Linear l(in, out, rng, noise_std);
        for (int i = 0; i < std::min(in, out); ++i)
            l.w->value.at(i, i) += static_cast<S>(scale);
        return l;
    }

    Var<S> operator()(Tape<S>& tape, const Var<S>& x) const {
        return add(tape, matmul(tape, x, w), b);
    }

    void collect(NamedParams<S>& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".w", w);
        out.emplace_back(prefix + ".b", b);
    }
};

template <class S>
struct LayerNorm {
    Var<S> gain;
    Var<S> bias;

    LayerNorm() = default;
    explicit LayerNorm(int dim) {
        gain = make_leaf(Tensor<S>::full({dim}, S(1)), true);
        bias = make_leaf(Tensor<S>::zeros({dim}), true);
    }

    Var<S> operator()(Tape<S>& tape, const Var<S>& x) const {
        return add(tape, mul(tape, layer_norm(tape, x), gain), bias);
    }

    void collect(NamedParams<S>& out, const std::string& prefix) const {
        out.emplace_back(prefix + ".gain", gain);
        out.emplace_back(prefix + ".bias", bias);
    }
};

// Pre-norm transformer block: x + attn(ln1(x)), then x + ffn(ln2(x)).
template <class S>
struct TransformerBlock {
    LayerNorm<S> ln1, ln2;
    Linear<S> wq, wk, wv, wo, ff1, ff2;
    int heads = 1;
    bool causal = true;

    TransformerBlock() = default;
    TransformerBlock(int d_model, int n_heads, int ffn_dim, bool causal_mask, Rng& rng,
                     double init_std = 0.02, bool identity_qkv = false)
        : ln1(d_model),
          ln2(d_model),
          wq(d_model, d_model, rng, init_std),
          wk(d_model, d_model, rng, init_std),
          wv(d_model, d_model, rng, init_std),
          wo(d_model, d_model, rng, init_std),
          ff1(d_model, ffn_dim, rng, init_std),
          ff2(ffn_dim, d_model, rng, init_std),
          heads(n_heads),
          causal(causal_mask) {
        if (identity_qkv) {
            wq = Linear<S>::eye(d_model, d_model, rng, 1.0, init_std * 0.25);
            wk = Linear<S>::eye(d_model, d_model, rng, 1.0, init_std * 0.25);
            wv = Linear<S>::eye(d_model, d_model, rng, 1.0, init_std * 0.25);
        }
    }

    Var<S> operator()(Tape<S>& tape, const Var<S>& x) const {
        auto h = ln1(tape, x);
        auto att = multi_head_attention(tape, wq(tape, h), wk(tape, h), wv(tape, h), heads, causal);
        auto x1 = add(tape, x, wo(tape, att));
        auto f = ff2(tape, gelu(tape, ff1(tape, ln2(tape, x1))));
        return add(tape, x1, f);
    }

    void collect(NamedParams<S>& out, const std::string& prefix) const {
        ln1.collect(out, prefix + ".ln1");
        ln2.collect(out, prefix + ".ln2");
        wq.collect(out, prefix + ".wq");
        wk.collect(out, prefix + ".wk");
        wv.collect(out, prefix + ".wv");
        wo.collect(out, prefix + ".wo");
        ff1.collect(out, prefix + ".ff1");
        ff2.collect(out, prefix + ".ff2");
    }
};

} // namespace detours::tad
