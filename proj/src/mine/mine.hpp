#pragma once

#include "core/types.hpp"

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace detours::mine {

class EmbedderMismatch : public std::runtime_error {
public:
    explicit EmbedderMismatch(const std::string& what) : std::runtime_error(what) {}
};

inline constexpr int kEmbedDim = 256;
inline constexpr double kDefaultSimilarityThreshold = 0.75;

struct SummaryEmbedding {
    std::string video_id;
    std::vector<double> vector; // L2-normalized
    std::string embedder_id;
};

// recipe + step descriptions; timestamps carry no signal and are left out
std::string summary_text(const VideoSummary& s);

// Hashed term-frequency bag of words, 256 buckets, sublinear tf,
// L2-normalized. Deterministic in the text.
SummaryEmbedding embed_summary(const VideoSummary& s);
SummaryEmbedding embed_text(const std::string& id, const std::string& text);

double cosine(const SummaryEmbedding& a, const SummaryEmbedding& b);

struct MinedPair {
    std::string id_a; // lexicographically smaller
    std::string id_b;
    double similarity = 0.0;
};

// All unordered pairs with cosine >= threshold, sorted by similarity
// descending (ties by ids). max_pairs_per_video = 0 means unlimited.
std::vector<MinedPair> mine_pairs(const std::vector<SummaryEmbedding>& embeddings,
                                  double threshold = kDefaultSimilarityThreshold,
                                  int max_pairs_per_video = 0);

// Vector cache in the DTRF format plus an id list alongside.
void save_embeddings(const std::filesystem::path& dtrf_path,
                     const std::vector<SummaryEmbedding>& embs);
std::vector<SummaryEmbedding> load_embeddings(const std::filesystem::path& dtrf_path);

} // namespace detours::mine
