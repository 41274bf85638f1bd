#pragma once

#include "model/model.hpp"
#include "tad/ops.hpp"

namespace detours::train {

class TargetOutsideCandidate : public std::runtime_error {
public:
    explicit TargetOutsideCandidate(const std::string& what) : std::runtime_error(what) {}
};

// Ground-truth (start, end) indices on the candidate grid: end-exclusive
// seconds clamped to the nearest surviving (possibly strided) positions,
// kept legal under start < end.
inline std::pair<int, int> loc_targets(const model::SequencePlan& plan, const TimeWindow& window,
                                       int cand_duration) {
    if (!window.valid() || window.end.seconds > cand_duration)
        throw TargetOutsideCandidate("window [" + std::to_string(window.start.seconds) + "," +
                                     std::to_string(window.end.seconds) + ") outside candidate of " +
                                     std::to_string(cand_duration) + " seconds");
    const auto& secs = plan.cand_seconds;
    const int l = static_cast<int>(secs.size());
    auto nearest = [&](int target) {
        int best = 0;
        int best_d = std::abs(secs[0] - target);
        for (int i = 1; i < l; ++i) {
            const int d = std::abs(secs[static_cast<size_t>(i)] - target);
            if (d < best_d) {
                best = i;
                best_d = d;
            }
        }
        return best;
    };
    int s = nearest(window.start.seconds);
    int e = nearest(window.end.seconds);
    s = std::min(s, l - 2);
    e = std::max(e, s + 1);
    e = std::min(e, l - 1);
    return {s, e};
}

template <class S>
tad::Var<S> retrieval_loss_for(tad::Tape<S>& tape, const model::DetourModel<S>& m,
                               const Mat32& src, int t_s, const std::vector<int>& query_ids,
                               const Mat32& cand, int label, bool use_source = true,
                               bool use_query = true) {
    auto a = m.assemble(tape, src, t_s, query_ids, cand, use_source, use_query);
    auto o = m.encode(tape, a);
    return tad::bce_with_logits(tape, m.retrieval_logit(tape, o), label);
}

// Mean of the start- and end-index cross entropies on the candidate grid.
template <class S>
tad::Var<S> localization_loss_for(tad::Tape<S>& tape, const model::DetourModel<S>& m,
                                  const Mat32& src, int t_s, const std::vector<int>& query_ids,
                                  const Mat32& cand, const TimeWindow& window,
                                  bool use_source = true, bool use_query = true) {
    auto a = m.assemble(tape, src, t_s, query_ids, cand, use_source, use_query);
    auto o = m.encode(tape, a);
    auto logits = m.localization_logits(tape, o, a.plan);
    const auto [ts, te] = loc_targets(a.plan, window, cand.rows);
    auto l = tad::add(tape, tad::cross_entropy(tape, logits.start, ts),
                      tad::cross_entropy(tape, logits.end, te));
    return tad::scale(tape, l, 0.5);
}

// Inference: argmax over legal (start, end) pairs of p_start * p_end,
// mapped back through the candidate's surviving seconds.
template <class S>
TimeWindow predict_window(tad::Tape<S>& tape, const model::DetourModel<S>& m,
                          const tad::Var<S>& outputs, const model::SequencePlan& plan) {
    auto logits = m.localization_logits(tape, outputs, plan);
    auto ps = tad::softmax(tape, logits.start);
    auto pe = tad::softmax(tape, logits.end);
    std::vector<double> vs(ps->value.data.begin(), ps->value.data.end());
    std::vector<double> ve(pe->value.data.begin(), pe->value.data.end());
    const auto [s, e] = model::pick_window(vs, ve);
    const auto& secs = plan.cand_seconds;
    const int start = secs[static_cast<size_t>(s)];
    const int end = e < static_cast<int>(secs.size()) ? secs[static_cast<size_t>(e)] : secs.back() + 1;
    return make_window(start, end);
}

} // namespace detours::train
