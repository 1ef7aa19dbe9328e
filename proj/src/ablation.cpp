#include "labharm/ablation.hpp"

#include <algorithm>

#include "labharm/error.hpp"
#include "labharm/parallel.hpp"

namespace labharm {

std::string_view to_string(AblationMode m) {
    switch (m) {
    case AblationMode::lexical: return "lexical";
    case AblationMode::semantic: return "semantic";
    case AblationMode::hybrid: return "hybrid";
    case AblationMode::hybrid_rerank: return "hybrid+rerank";
    }
    return "?";
}

AblationMode parse_ablation_mode(std::string_view s) {
    for (auto m : {AblationMode::lexical, AblationMode::semantic, AblationMode::hybrid, AblationMode::hybrid_rerank}) {
        if (to_string(m) == s) return m;
    }
    throw InvalidArgument("unknown ablation mode '" + std::string(s) + "'");
}

SignalCache SignalCache::build(const HybridRetriever& retriever, std::span<const QueryRecord> queries,
                               std::size_t max_edits, std::size_t threads) {
    SignalCache c;
    c.signals.resize(queries.size());
    for (const auto& q : queries) {
        c.query_ids.push_back(q.id);
        c.triads.push_back(q.triad);
    }
    parallel_for(queries.size(), threads,
                 [&](std::size_t i) { c.signals[i] = retriever.signals(queries[i].triad, max_edits); });
    return c;
}

std::size_t exhaustive_gold_rank(const HybridRetriever& retriever, const QuerySignals& s, std::size_t gold_doc,
                                 const WeightVector& w, double min_semantic) {
    const auto& recs = retriever.lexical().records();
    auto eligible = [&](std::size_t d, double lex) {
        return (w.alpha > 0 && lex > 0) || (w.beta > 0 && s.semantic[d] >= min_semantic);
    };
    const double gold_lex = s.lexical(gold_doc, w);
    if (!eligible(gold_doc, gold_lex)) return 0;
    const double gold_fused = w.alpha * gold_lex + w.beta * s.semantic[gold_doc];
    const auto& gold_id = recs[gold_doc].id;
    std::size_t rank = 1;
    for (std::size_t d = 0; d < recs.size(); ++d) {
        if (d == gold_doc) continue;
        const double lex = s.lexical(d, w);
        if (!eligible(d, lex)) continue;
        const double fused = w.alpha * lex + w.beta * s.semantic[d];
        if (fused > gold_fused || (fused == gold_fused && recs[d].id < gold_id)) ++rank;
    }
    return rank;
}

double mrr_objective(const HybridRetriever& retriever, const SignalCache& cache, const GoldSet& gold,
                     const WeightVector& w, double min_semantic) {
    if (cache.signals.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < cache.signals.size(); ++i) {
        const auto g = gold.find(cache.query_ids[i]);
        if (g == gold.end()) throw MissingGold("no gold label for query '" + cache.query_ids[i] + "'");
        const auto doc = retriever.lexical().find(g->second);
        if (!doc) throw UnknownRecord("gold record '" + g->second + "' is not indexed");
        const auto r = exhaustive_gold_rank(retriever, cache.signals[i], *doc, w, min_semantic);
        if (r) sum += 1.0 / static_cast<double>(r);
    }
    return sum / static_cast<double>(cache.signals.size());
}

WeightTuneResult tune_retrieval_weights(const HybridRetriever& retriever, const SignalCache& cache,
                                        const GoldSet& gold, const TunerConfig& cfg, double min_semantic) {
    auto objective = [&](const WeightVector& w) { return mrr_objective(retriever, cache, gold, w, min_semantic); };

    // Lexical-only pre-search over the field weights (alpha = 1, beta = 0).
    TunerConfig lex_cfg = cfg;
    lex_cfg.bounds = {{0, 0, 0}, {WeightVector::kFieldMax, WeightVector::kFieldMax, WeightVector::kFieldMax}};
    lex_cfg.initial_designs = std::min<std::size_t>(cfg.initial_designs, 10);
    lex_cfg.budget = std::max(cfg.budget / 4, lex_cfg.initial_designs);
    lex_cfg.warm_start = {{1, 1, 1}};
    lex_cfg.seed = Rng::derive(cfg.seed, 1);
    const auto lex = tune(
        [&](std::span<const double> x) { return objective({1.0, 0.0, x[0], x[1], x[2]}); }, lex_cfg);

    TunerConfig full = cfg;
    full.warm_start.insert(full.warm_start.begin(),
                           {{1.0, 0.0, lex.best_theta[0], lex.best_theta[1], lex.best_theta[2]}, {0.0, 1.0, 1.0, 1.0, 1.0}});
    // Semantic-only ordering does not depend on the weights, so one point covers it.
    return tune_weights(objective, full);
}

std::vector<AblationRow> run_ablation(const HybridRetriever& retriever, const SignalCache& cache, const GoldSet& gold,
                                      std::span<const AblationMode> modes, const AblationConfig& cfg,
                                      const CompatibilityScorer* scorer) {
    std::vector<AblationRow> rows;
    for (auto mode : modes) {
        if (mode == AblationMode::hybrid_rerank && !scorer) throw InvalidArgument("hybrid+rerank needs a scorer");
        const RetrievalMode rm = mode == AblationMode::lexical    ? RetrievalMode::lexical
                                 : mode == AblationMode::semantic ? RetrievalMode::semantic
                                                                  : RetrievalMode::hybrid;
        const auto w = weights_for_mode(cfg.weights, rm);
        AblationRow row{mode, {}, std::vector<Run>(cache.signals.size()), 0};
        std::vector<char> changed(cache.signals.size(), 0);
        parallel_for(cache.signals.size(), cfg.threads, [&](std::size_t i) {
            auto ranked = retriever.rank(cache.signals[i], w, cfg.retrieval.top_k, cfg.retrieval.min_semantic);
            if (mode == AblationMode::hybrid_rerank && !ranked.empty()) {
                const auto out = apply_reranker(cache.triads[i], ranked, retriever.lexical(), *scorer, cfg.rerank);
                changed[i] = out.ranking.front().record_id != ranked.front().record_id;
                ranked = out.ranking;
            }
            Run run{cache.query_ids[i], {}};
            for (const auto& c : ranked) run.ranked_ids.push_back(c.record_id);
            row.runs[i] = std::move(run);
        });
        row.reranked = static_cast<std::size_t>(std::count(changed.begin(), changed.end(), 1));
        row.report = compute_report(row.runs, gold, cfg.ks);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string format_ablation(const std::vector<AblationRow>& rows) {
    std::vector<std::pair<std::string, MetricReport>> table;
    for (const auto& r : rows) table.emplace_back(std::string(to_string(r.mode)), r.report);
    return format_table(table);
}

nlohmann::json ablation_json(const std::vector<AblationRow>& rows, const WeightVector& w, double lambda) {
    nlohmann::json j{{"weights",
                      {{"alpha", w.alpha}, {"beta", w.beta}, {"w_test", w.w_test}, {"w_sample", w.w_sample},
                       {"w_unit", w.w_unit}}},
                     {"lambda", lambda},
                     {"modes", nlohmann::json::array()}};
    for (const auto& r : rows) {
        auto m = r.report.to_json();
        m["mode"] = to_string(r.mode);
        if (r.mode == AblationMode::hybrid_rerank) m["top1_changed"] = r.reranked;
        j["modes"].push_back(std::move(m));
    }
    return j;
}

}  // namespace labharm
