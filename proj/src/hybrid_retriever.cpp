#include "labharm/hybrid_retriever.hpp"

#include <algorithm>

#include "labharm/error.hpp"
#include "labharm/parallel.hpp"

namespace labharm {

std::string_view to_string(RetrievalMode m) {
    switch (m) {
    case RetrievalMode::lexical: return "lexical";
    case RetrievalMode::semantic: return "semantic";
    case RetrievalMode::hybrid: return "hybrid";
    }
    return "?";
}

RetrievalMode parse_retrieval_mode(std::string_view s) {
    if (s == "lexical") return RetrievalMode::lexical;
    if (s == "semantic") return RetrievalMode::semantic;
    if (s == "hybrid") return RetrievalMode::hybrid;
    throw InvalidArgument("unknown retrieval mode '" + std::string(s) + "'");
}

void RetrievalConfig::validate() const {
    weights.validate();
    if (top_k < 1) throw InvalidArgument("top_k must be >= 1");
    if (max_edits > 2) throw InvalidArgument("max_edits must be 0, 1 or 2");
    if (!(min_semantic >= 0.0 && min_semantic <= 1.0)) throw InvalidArgument("min_semantic must be in [0,1]");
}

WeightVector weights_for_mode(const WeightVector& w, RetrievalMode mode) {
    WeightVector out = w;
    if (mode == RetrievalMode::lexical) out.beta = 0.0;
    if (mode == RetrievalMode::semantic) out.alpha = 0.0;
    return out;
}

HybridRetriever::HybridRetriever(const LexicalIndex& lexical, const VectorStore& vectors,
                                 const EmbeddingProvider& provider)
    : lexical_(&lexical), vectors_(vectors.aligned_to(lexical.records())), provider_(&provider) {
    if (vectors_.size() > 0 && vectors_.dimension() != provider.dimension()) {
        throw DimensionMismatch("provider dimension " + std::to_string(provider.dimension()) +
                                " != store dimension " + std::to_string(vectors_.dimension()));
    }
}

QuerySignals HybridRetriever::signals(const Triad& query, std::size_t max_edits) const {
    const auto v = provider_->embed(record_text(query));
    return signals(query, v, max_edits);
}

QuerySignals HybridRetriever::signals(const Triad& query, std::span<const double> query_vector,
                                      std::size_t max_edits) const {
    QuerySignals s;
    const auto n = lexical_->size();
    const auto prepared = lexical_->prepare(query, max_edits);
    for (auto f : kFields) {
        auto& scores = s.field_scores[static_cast<std::size_t>(f)];
        scores.assign(n, 0.0);
        lexical_->accumulate(f, prepared[static_cast<std::size_t>(f)], scores);
    }
    s.semantic = vectors_.scores(query_vector);
    return s;
}

std::vector<RankedCandidate> HybridRetriever::rank(const QuerySignals& s, const WeightVector& w, std::size_t top_k,
                                                   double min_semantic) const {
    const auto n = lexical_->size();
    struct Entry {
        double fused;
        std::size_t doc;
    };
    std::vector<Entry> eligible;
    eligible.reserve(std::min<std::size_t>(n, 4096));
    for (std::size_t doc = 0; doc < n; ++doc) {
        const double lex = s.lexical(doc, w);
        const double sem = s.semantic[doc];
        const bool lexical_hit = w.alpha > 0.0 && lex > 0.0;
        const bool semantic_hit = w.beta > 0.0 && sem > 0.0 && sem >= min_semantic;
        if (!lexical_hit && !semantic_hit) continue;
        const double fused = w.alpha * lex + w.beta * sem;
        if (fused > 0.0) eligible.push_back({fused, doc});
    }
    const auto& records = lexical_->records();
    auto better = [&](const Entry& a, const Entry& b) {
        if (a.fused != b.fused) return a.fused > b.fused;
        return records[a.doc].id < records[b.doc].id;
    };
    const auto k = std::min(top_k, eligible.size());
    std::partial_sort(eligible.begin(), eligible.begin() + static_cast<std::ptrdiff_t>(k), eligible.end(), better);

    std::vector<RankedCandidate> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto doc = eligible[i].doc;
        RankedCandidate c;
        c.record_id = records[doc].id;
        c.doc = doc;
        c.lexical_score = s.lexical(doc, w);
        c.semantic_score = s.semantic[doc];
        c.fused_score = eligible[i].fused;
        c.final_score = c.fused_score;
        c.rank = static_cast<int>(i + 1);
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<RankedCandidate> HybridRetriever::retrieve(const Triad& query, const RetrievalConfig& cfg,
                                                       RetrievalMode mode) const {
    cfg.validate();
    if (lexical_->size() == 0) return {};
    const auto w = weights_for_mode(cfg.weights, mode);
    return rank(signals(query, cfg.max_edits), w, cfg.top_k, cfg.min_semantic);
}

std::vector<std::vector<RankedCandidate>> HybridRetriever::retrieve_batch(std::span<const Triad> queries,
                                                                          const RetrievalConfig& cfg,
                                                                          RetrievalMode mode,
                                                                          std::size_t threads) const {
    std::vector<std::vector<RankedCandidate>> out(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) { out[i] = retrieve(queries[i], cfg, mode); });
    return out;
}

std::vector<RankedCandidate> normalize_candidate_scores(std::vector<RankedCandidate> candidates) {
    if (candidates.empty()) throw EmptyCandidateList("cannot normalize an empty candidate list");
    double lo = candidates.front().fused_score, hi = lo;
    for (const auto& c : candidates) {
        lo = std::min(lo, c.fused_score);
        hi = std::max(hi, c.fused_score);
    }
    for (auto& c : candidates) c.retrieval_norm = hi > lo ? (c.fused_score - lo) / (hi - lo) : 1.0;
    return candidates;
}

}  // namespace labharm
