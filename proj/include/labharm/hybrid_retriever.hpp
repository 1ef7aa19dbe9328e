#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labharm/embedding.hpp"
#include "labharm/lexical_index.hpp"
#include "labharm/types.hpp"

namespace labharm {

enum class RetrievalMode { lexical, semantic, hybrid };

std::string_view to_string(RetrievalMode m);
RetrievalMode parse_retrieval_mode(std::string_view s);

struct RetrievalConfig {
    WeightVector weights;
    std::size_t top_k = 10;
    std::size_t max_edits = 1;
    /// A record with no lexical contribution becomes a candidate only when
    /// its clipped cosine reaches this floor. Scores are not altered.
    double min_semantic = 0.15;

    void validate() const;
};

struct RankedCandidate {
    std::string record_id;
    std::size_t doc = 0;  // position in the lexical index
    double lexical_score = 0.0;
    double semantic_score = 0.0;
    double fused_score = 0.0;
    double retrieval_norm = 0.0;
    std::optional<double> rerank_score;
    double final_score = 0.0;
    int rank = 0;
};

/// Per-record retrieval signals for one query: unweighted BM25 for each
/// field and clipped cosine, all indexed by document.
struct QuerySignals {
    std::array<std::vector<double>, 3> field_scores;
    std::vector<double> semantic;

    double lexical(std::size_t doc, const WeightVector& w) const {
        return w.w_test * field_scores[0][doc] + w.w_sample * field_scores[1][doc] + w.w_unit * field_scores[2][doc];
    }
};

/// Fuses fielded BM25 and clipped cosine:
/// fused = alpha * sum_f w_f BM25_f + beta * max(0, cos).
class HybridRetriever {
public:
    /// The store is realigned to index order; throws IndexMismatch when the
    /// two cover different record sets and DimensionMismatch when the
    /// provider's dimension differs from the store's.
    HybridRetriever(const LexicalIndex& lexical, const VectorStore& vectors, const EmbeddingProvider& provider);

    const LexicalIndex& lexical() const { return *lexical_; }
    const VectorStore& vectors() const { return vectors_; }
    const EmbeddingProvider& provider() const { return *provider_; }

    QuerySignals signals(const Triad& query, std::size_t max_edits) const;
    QuerySignals signals(const Triad& query, std::span<const double> query_vector, std::size_t max_edits) const;

    /// Exhaustive fusion over all records; best top_k by fused score, ties by
    /// record id ascending.
    std::vector<RankedCandidate> rank(const QuerySignals& s, const WeightVector& w, std::size_t top_k,
                                      double min_semantic) const;

    std::vector<RankedCandidate> retrieve(const Triad& query, const RetrievalConfig& cfg,
                                          RetrievalMode mode = RetrievalMode::hybrid) const;

    /// Concurrent per-query retrieval; results follow input order.
    std::vector<std::vector<RankedCandidate>> retrieve_batch(std::span<const Triad> queries,
                                                             const RetrievalConfig& cfg, RetrievalMode mode,
                                                             std::size_t threads) const;

private:
    const LexicalIndex* lexical_;
    VectorStore vectors_;
    const EmbeddingProvider* provider_;
};

/// Weights actually used for a mode: lexical zeroes beta, semantic zeroes
/// alpha, hybrid keeps both.
WeightVector weights_for_mode(const WeightVector& w, RetrievalMode mode);

/// Min-max scales fused scores into retrieval_norm in [0,1]. A single
/// candidate or a degenerate range maps to 1. Throws EmptyCandidateList.
std::vector<RankedCandidate> normalize_candidate_scores(std::vector<RankedCandidate> candidates);

}  // namespace labharm
