#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace detours::model {

class SequenceOverflow : public std::runtime_error {
public:
    explicit SequenceOverflow(const std::string& what) : std::runtime_error(what) {}
};

enum class Segment : uint8_t { cls, sep, source, query, candidate };

// Position layout of one assembled sequence, independent of any model
// parameters: [CLS] [SEP_SRC] source rows [SEP_QRY] query tokens
// [SEP_CAND] candidate rows. An ablation drops a segment's content but
// keeps its separator. Over-long inputs lose source from the left first,
// then the candidate is strided uniformly.
struct SequencePlan {
    std::vector<Segment> segments;
    std::vector<int> source_seconds; // surviving source rows, ascending
    std::vector<int> query_ids;
    std::vector<int> cand_seconds; // surviving candidate seconds, ascending
    int cand_begin = 0;            // [cand_begin, cand_end) positions
    int cand_end = 0;

    int length() const { return static_cast<int>(segments.size()); }
};

SequencePlan plan_sequence(int t_s, const std::vector<int>& query_ids, int cand_duration,
                           bool use_source, bool use_query, int max_seq, int max_stride);

// Highest-probability legal (start, end) pair under start < end; inputs
// are probability vectors over candidate positions.
std::pair<int, int> pick_window(const std::vector<double>& p_start,
                                const std::vector<double>& p_end);

} // namespace detours::model
