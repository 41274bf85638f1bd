#pragma once

#include "core/types.hpp"
#include "model/config.hpp"
#include "model/plan.hpp"
#include "model/vocab.hpp"
#include "tad/nn.hpp"

namespace detours::model {

// The early-fusion network: visual mapper into the token space, causal
// sequence encoder over [CLS | SEP source SEP query SEP candidate], a
// small transformer classifier head for retrieval, and per-position
// start/end projections for localization.
template <class S>
struct DetourModel {
    ModelConfig cfg;

    tad::Var<S> token_emb; // [vocab x d]
    tad::Var<S> pos_emb;   // [max_seq x d]
    tad::Var<S> seg_emb;   // [5 x d]
    tad::Linear<S> mapper; // feature_dim -> d
    std::vector<tad::TransformerBlock<S>> blocks;
    tad::LayerNorm<S> final_ln;

    tad::Linear<S> head_in; // d -> head_dim
    tad::Var<S> head_cls;   // [1 x head_dim]
    tad::Var<S> head_pos;   // [max_seq + 1 x head_dim]
    std::vector<tad::TransformerBlock<S>> head_blocks;
    tad::LayerNorm<S> head_ln;
    tad::Linear<S> head_out; // head_dim -> 1

    tad::Linear<S> loc_start; // d -> 1
    tad::Linear<S> loc_end;   // d -> 1

    static DetourModel init(const ModelConfig& cfg, uint64_t seed) {
        cfg.validate();
        if (cfg.vocab_size < Vocab::kReserved)
            throw ConfigError("model.vocab_size", "must cover the reserved ids");
        Rng rng(seed ^ 0xD0D0ull);
        DetourModel m;
        m.cfg = cfg;
        const int d = cfg.d_model;
        const int hd = cfg.head_dim();
        const double std = cfg.init_std;
        // position/segment/CLS embeddings start small so sample content,
        // not constant offsets, dominates the readout early in training
        const double const_std = std * 0.25;
        m.token_emb = tad::make_leaf(tad::Tensor<S>::randn({cfg.vocab_size, d}, rng, std), true);
        m.pos_emb = tad::make_leaf(tad::Tensor<S>::randn({cfg.max_seq, d}, rng, const_std), true);
        m.seg_emb = tad::make_leaf(tad::Tensor<S>::randn({5, d}, rng, const_std), true);
        m.mapper = cfg.identity_attention_init
                       ? tad::Linear<S>::eye(cfg.feature_dim, d, rng, 1.0, std * 0.25)
                       : tad::Linear<S>(cfg.feature_dim, d, rng, std);
        for (int i = 0; i < cfg.n_layers; ++i)
            m.blocks.emplace_back(d, cfg.n_heads, cfg.ffn_dim, !cfg.bidirectional_encoder, rng, std,
                                  cfg.identity_attention_init);
        m.final_ln = tad::LayerNorm<S>(d);
        m.head_in = cfg.identity_attention_init
                        ? tad::Linear<S>::eye(d, hd, rng, 1.0, std * 0.25)
                        : tad::Linear<S>(d, hd, rng, std);
        m.head_cls = tad::make_leaf(tad::Tensor<S>::randn({1, hd}, rng, const_std), true);
        m.head_pos = tad::make_leaf(tad::Tensor<S>::randn({cfg.max_seq + 1, hd}, rng, const_std), true);
        for (int i = 0; i < cfg.retrieval_head.layers; ++i)
            m.head_blocks.emplace_back(hd, cfg.retrieval_head.heads, cfg.retrieval_head.ffn_dim,
                                       /*causal=*/false, rng, std, cfg.identity_attention_init);
        m.head_ln = tad::LayerNorm<S>(hd);
        // near-zero readouts: early steps climb the class-mean gap instead
        // of unlearning random logit noise, while gradients still reach
        // every upstream parameter from the first backward pass
        m.head_out = tad::Linear<S>(hd, 1, rng, 0.01);
        m.loc_start = tad::Linear<S>(d, 1, rng, 0.01);
        m.loc_end = tad::Linear<S>(d, 1, rng, 0.01);
        return m;
    }

    tad::NamedParams<S> named_params() const {
        tad::NamedParams<S> out;
        out.emplace_back("token_emb", token_emb);
        out.emplace_back("pos_emb", pos_emb);
        out.emplace_back("seg_emb", seg_emb);
        mapper.collect(out, "mapper");
        for (size_t i = 0; i < blocks.size(); ++i)
            blocks[i].collect(out, "block" + std::to_string(i));
        final_ln.collect(out, "final_ln");
        head_in.collect(out, "head_in");
        out.emplace_back("head_cls", head_cls);
        out.emplace_back("head_pos", head_pos);
        for (size_t i = 0; i < head_blocks.size(); ++i)
            head_blocks[i].collect(out, "head_block" + std::to_string(i));
        head_ln.collect(out, "head_ln");
        head_out.collect(out, "head_out");
        loc_start.collect(out, "loc_start");
        loc_end.collect(out, "loc_end");
        return out;
    }

    std::vector<tad::Var<S>> params() const {
        std::vector<tad::Var<S>> out;
        for (auto& [name, p] : named_params()) out.push_back(p);
        return out;
    }

    struct Assembled {
        tad::Var<S> embeddings; // [T x d]
        SequencePlan plan;
    };

    Assembled assemble(tad::Tape<S>& tape, const Mat32& src_features, int t_s,
                       const std::vector<int>& query_ids, const Mat32& cand_features,
                       bool use_source = true, bool use_query = true) const {
        if (src_features.cols != cfg.feature_dim || cand_features.cols != cfg.feature_dim)
            throw tad::ShapeMismatch("assemble: feature dim " + std::to_string(src_features.cols) +
                                     " vs config " + std::to_string(cfg.feature_dim));
        if (t_s < 0 || t_s > src_features.rows)
            throw tad::IndexOutOfRange("assemble: t_s " + std::to_string(t_s) + " outside source of " +
                                       std::to_string(src_features.rows) + " seconds");
        SequencePlan plan = plan_sequence(t_s, query_ids, cand_features.rows, use_source, use_query,
                                          cfg.max_seq, cfg.max_candidate_stride);

        auto rows_leaf = [&](const Mat32& feats, const std::vector<int>& seconds) {
            tad::Tensor<S> t({static_cast<int>(seconds.size()), cfg.feature_dim});
            for (size_t i = 0; i < seconds.size(); ++i) {
                const float* row = feats.row(seconds[i]);
                for (int c = 0; c < cfg.feature_dim; ++c)
                    t.at(static_cast<int>(i), c) = static_cast<S>(row[c]);
            }
            return tad::make_leaf(std::move(t), false);
        };

        std::vector<tad::Var<S>> pieces;
        pieces.push_back(tad::embedding_lookup(tape, token_emb, {Vocab::kCls, Vocab::kSepSrc}));
        if (!plan.source_seconds.empty())
            pieces.push_back(mapper(tape, rows_leaf(src_features, plan.source_seconds)));
        std::vector<int> mid = {Vocab::kSepQry};
        mid.insert(mid.end(), plan.query_ids.begin(), plan.query_ids.end());
        mid.push_back(Vocab::kSepCand);
        pieces.push_back(tad::embedding_lookup(tape, token_emb, mid));
        pieces.push_back(mapper(tape, rows_leaf(cand_features, plan.cand_seconds)));

        auto x = tad::concat(tape, pieces);
        const int t_len = plan.length();
        x = tad::add(tape, x, tad::slice(tape, pos_emb, 0, 0, t_len));
        std::vector<int> seg_ids(static_cast<size_t>(t_len));
        for (int i = 0; i < t_len; ++i)
            seg_ids[static_cast<size_t>(i)] = static_cast<int>(plan.segments[static_cast<size_t>(i)]);
        x = tad::add(tape, x, tad::embedding_lookup(tape, seg_emb, seg_ids));
        return Assembled{x, std::move(plan)};
    }

    tad::Var<S> encode(tad::Tape<S>& tape, const Assembled& a) const {
        if (a.plan.length() > cfg.max_seq)
            throw SequenceOverflow("sequence of " + std::to_string(a.plan.length()) +
                                   " exceeds max_seq " + std::to_string(cfg.max_seq));
        auto x = a.embeddings;
        for (const auto& b : blocks) x = b(tape, x);
        return final_ln(tape, x);
    }

    // CLS-token transformer classifier over the encoder outputs.
    tad::Var<S> retrieval_logit(tad::Tape<S>& tape, const tad::Var<S>& outputs) const {
        auto h = head_in(tape, outputs);
        auto x = tad::concat(tape, {head_cls, h});
        x = tad::add(tape, x, tad::slice(tape, head_pos, 0, 0, x->value.rows()));
        for (const auto& b : head_blocks) x = b(tape, x);
        x = head_ln(tape, x);
        auto cls = tad::slice(tape, x, 0, 0, 1);
        return tad::reshape(tape, head_out(tape, cls), {1});
    }

    struct LocLogits {
        tad::Var<S> start; // [L]
        tad::Var<S> end;   // [L]
    };

    LocLogits localization_logits(tad::Tape<S>& tape, const tad::Var<S>& outputs,
                                  const SequencePlan& plan) const {
        if (plan.cand_end <= plan.cand_begin)
            throw tad::ShapeMismatch("localization over an empty candidate span");
        auto cand = tad::slice(tape, outputs, 0, plan.cand_begin, plan.cand_end);
        const int l = plan.cand_end - plan.cand_begin;
        return {tad::reshape(tape, loc_start(tape, cand), {l}),
                tad::reshape(tape, loc_end(tape, cand), {l})};
    }
};

} // namespace detours::model
