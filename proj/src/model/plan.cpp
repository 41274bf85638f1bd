#include "model/plan.hpp"

namespace detours::model {

SequencePlan plan_sequence(int t_s, const std::vector<int>& query_ids, int cand_duration,
                           bool use_source, bool use_query, int max_seq, int max_stride) {
    if (cand_duration <= 0) throw SequenceOverflow("candidate has no rows");

    SequencePlan plan;
    plan.query_ids = use_query ? query_ids : std::vector<int>{};
    const int qlen = static_cast<int>(plan.query_ids.size());
    const int overhead = 4 + qlen; // CLS + three separators + query tokens

    int src_len = use_source ? t_s : 0;
    int space = max_seq - overhead;
    if (space < 1)
        throw SequenceOverflow("query alone exceeds max_seq " + std::to_string(max_seq));

    // source gives way first, from its left end (the oldest context)
    if (src_len + cand_duration > space) src_len = std::max(0, space - cand_duration);

    int stride = 1;
    if (cand_duration > space - src_len) {
        const int avail = space - src_len;
        stride = (cand_duration + avail - 1) / avail;
        if (stride > max_stride)
            throw SequenceOverflow("candidate of " + std::to_string(cand_duration) +
                                   " seconds cannot fit " + std::to_string(avail) +
                                   " positions within stride " + std::to_string(max_stride));
    }

    for (int s = t_s - src_len; s < t_s; ++s) plan.source_seconds.push_back(s);
    for (int s = 0; s < cand_duration; s += stride) plan.cand_seconds.push_back(s);

    plan.segments.push_back(Segment::cls);
    plan.segments.push_back(Segment::sep);
    for (size_t i = 0; i < plan.source_seconds.size(); ++i) plan.segments.push_back(Segment::source);
    plan.segments.push_back(Segment::sep);
    for (int i = 0; i < qlen; ++i) plan.segments.push_back(Segment::query);
    plan.segments.push_back(Segment::sep);
    plan.cand_begin = plan.length();
    for (size_t i = 0; i < plan.cand_seconds.size(); ++i) plan.segments.push_back(Segment::candidate);
    plan.cand_end = plan.length();
    return plan;
}

std::pair<int, int> pick_window(const std::vector<double>& p_start,
                                const std::vector<double>& p_end) {
    const int n = static_cast<int>(p_start.size());
    if (n <= 1) return {0, 1};
    double best = -1.0;
    std::pair<int, int> arg{0, 1};
    for (int s = 0; s < n - 1; ++s) {
        for (int e = s + 1; e < n; ++e) {
            const double p = p_start[static_cast<size_t>(s)] * p_end[static_cast<size_t>(e)];
            if (p > best) {
                best = p;
                arg = {s, e};
            }
        }
    }
    return arg;
}

} // namespace detours::model
