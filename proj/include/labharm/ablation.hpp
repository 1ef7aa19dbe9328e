#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "labharm/bayes_tuner.hpp"
#include "labharm/hybrid_retriever.hpp"
#include "labharm/metrics.hpp"
#include "labharm/reranker.hpp"

namespace labharm {

enum class AblationMode { lexical, semantic, hybrid, hybrid_rerank };

std::string_view to_string(AblationMode m);  // "lexical", "semantic", "hybrid", "hybrid+rerank"
AblationMode parse_ablation_mode(std::string_view s);

/// Retrieval signals of a query set, computed once and reused across weight
/// vectors.
struct SignalCache {
    std::vector<std::string> query_ids;
    std::vector<Triad> triads;
    std::vector<QuerySignals> signals;

    static SignalCache build(const HybridRetriever& retriever, std::span<const QueryRecord> queries,
                             std::size_t max_edits, std::size_t threads);
};

/// Rank of the gold record under exhaustive fusion with the same
/// eligibility and tie rules as HybridRetriever::rank; 0 when the gold
/// record is not a candidate.
std::size_t exhaustive_gold_rank(const HybridRetriever& retriever, const QuerySignals& s, std::size_t gold_doc,
                                 const WeightVector& w, double min_semantic);

/// Mean reciprocal rank of gold over the cache; the tuning objective.
/// Throws MissingGold.
double mrr_objective(const HybridRetriever& retriever, const SignalCache& cache, const GoldSet& gold,
                     const WeightVector& w, double min_semantic);

/// Tunes all five weights on the cache. The best lexical-only and
/// semantic-only points found by short pre-searches warm-start the run.
WeightTuneResult tune_retrieval_weights(const HybridRetriever& retriever, const SignalCache& cache,
                                        const GoldSet& gold, const TunerConfig& cfg, double min_semantic);

struct AblationRow {
    AblationMode mode;
    MetricReport report;
    std::vector<Run> runs;
    std::size_t reranked = 0;  // queries whose top-1 changed after reranking
};

struct AblationConfig {
    WeightVector weights;
    RetrievalConfig retrieval;  // weights field is ignored
    RerankOptions rerank;
    std::vector<std::size_t> ks = kDefaultCutoffs;
    std::size_t threads = 0;
};

/// One report per mode. hybrid_rerank requires a scorer.
std::vector<AblationRow> run_ablation(const HybridRetriever& retriever, const SignalCache& cache, const GoldSet& gold,
                                      std::span<const AblationMode> modes, const AblationConfig& cfg,
                                      const CompatibilityScorer* scorer);

std::string format_ablation(const std::vector<AblationRow>& rows);
nlohmann::json ablation_json(const std::vector<AblationRow>& rows, const WeightVector& w, double lambda);

}  // namespace labharm
