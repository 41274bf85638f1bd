#include "mine/mine.hpp"

#include "core/io.hpp"
#include "core/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

namespace detours::mine {

namespace {

const std::string kEmbedderId = "tf-hash-256";

std::vector<std::string> tokenize(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text + " ") {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        } else if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    }
    return out;
}

} // namespace

std::string summary_text(const VideoSummary& s) {
    std::string text = s.recipe;
    for (const auto& st : s.steps) {
        text += ' ';
        text += st.text;
    }
    return text;
}

SummaryEmbedding embed_text(const std::string& id, const std::string& text) {
    std::map<int, int> counts;
    for (const auto& tok : tokenize(text))
        ++counts[static_cast<int>(fnv1a64(tok) % kEmbedDim)];
    SummaryEmbedding e;
    e.video_id = id;
    e.embedder_id = kEmbedderId;
    e.vector.assign(kEmbedDim, 0.0);
    double norm = 0.0;
    for (const auto& [bucket, tf] : counts) {
        const double w = 1.0 + std::log(static_cast<double>(tf));
        e.vector[static_cast<size_t>(bucket)] = w;
        norm += w * w;
    }
    norm = std::sqrt(std::max(norm, 1e-12));
    for (auto& x : e.vector) x /= norm;
    return e;
}

SummaryEmbedding embed_summary(const VideoSummary& s) {
    return embed_text(s.video_id, summary_text(s));
}

double cosine(const SummaryEmbedding& a, const SummaryEmbedding& b) {
    if (a.embedder_id != b.embedder_id)
        throw EmbedderMismatch("embedder ids differ: " + a.embedder_id + " vs " + b.embedder_id);
    double dot = 0.0;
    for (size_t i = 0; i < a.vector.size(); ++i) dot += a.vector[i] * b.vector[i];
    return dot;
}

std::vector<MinedPair> mine_pairs(const std::vector<SummaryEmbedding>& embeddings,
                                  double threshold, int max_pairs_per_video) {
    // order by id first so output is invariant under input permutation
    std::vector<const SummaryEmbedding*> sorted;
    sorted.reserve(embeddings.size());
    for (const auto& e : embeddings) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(),
              [](const auto* a, const auto* b) { return a->video_id < b->video_id; });

    std::vector<MinedPair> pairs;
    for (size_t i = 0; i < sorted.size(); ++i) {
        for (size_t j = i + 1; j < sorted.size(); ++j) {
            if (sorted[i]->video_id == sorted[j]->video_id) continue; // dedup duplicates
            const double sim = cosine(*sorted[i], *sorted[j]);
            if (sim >= threshold)
                pairs.push_back({sorted[i]->video_id, sorted[j]->video_id, sim});
        }
    }
    std::sort(pairs.begin(), pairs.end(), [](const MinedPair& a, const MinedPair& b) {
        if (a.similarity != b.similarity) return a.similarity > b.similarity;
        if (a.id_a != b.id_a) return a.id_a < b.id_a;
        return a.id_b < b.id_b;
    });

    if (max_pairs_per_video > 0) {
        std::map<std::string, int> used;
        std::vector<MinedPair> capped;
        for (const auto& p : pairs) {
            if (used[p.id_a] >= max_pairs_per_video || used[p.id_b] >= max_pairs_per_video)
                continue;
            ++used[p.id_a];
            ++used[p.id_b];
            capped.push_back(p);
        }
        return capped;
    }
    return pairs;
}

void save_embeddings(const std::filesystem::path& dtrf_path,
                     const std::vector<SummaryEmbedding>& embs) {
    Mat32 m(static_cast<int>(embs.size()), kEmbedDim);
    std::vector<nlohmann::json> ids;
    for (size_t i = 0; i < embs.size(); ++i) {
        for (int c = 0; c < kEmbedDim; ++c)
            m.at(static_cast<int>(i), c) = static_cast<float>(embs[i].vector[static_cast<size_t>(c)]);
        ids.push_back({{"video_id", embs[i].video_id}, {"embedder_id", embs[i].embedder_id}});
    }
    write_dtrf(dtrf_path, m);
    write_jsonl(dtrf_path.string() + ".ids.jsonl", ids);
}

std::vector<SummaryEmbedding> load_embeddings(const std::filesystem::path& dtrf_path) {
    const Mat32 m = read_dtrf(dtrf_path);
    const auto ids = read_jsonl(dtrf_path.string() + ".ids.jsonl");
    std::vector<SummaryEmbedding> out;
    for (size_t i = 0; i < ids.size(); ++i) {
        SummaryEmbedding e;
        e.video_id = ids[i].at("video_id").get<std::string>();
        e.embedder_id = ids[i].at("embedder_id").get<std::string>();
        e.vector.resize(static_cast<size_t>(m.cols));
        for (int c = 0; c < m.cols; ++c)
            e.vector[static_cast<size_t>(c)] = static_cast<double>(m.at(static_cast<int>(i), c));
        out.push_back(std::move(e));
    }
    return out;
}

} // namespace detours::mine
