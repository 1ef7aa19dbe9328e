#pragma once
// Brute-force reference implementations used to check the engine.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <vector>

#include "labharm/lexical_index.hpp"
#include "labharm/rng.hpp"
#include "labharm/text.hpp"

namespace oracle {

using Tokens = std::vector<std::string>;

/// Per field, per record: the token list a record contributes to that field.
inline std::array<std::vector<Tokens>, 3> field_documents(const std::vector<labharm::ReferenceRecord>& records) {
    std::array<std::vector<Tokens>, 3> docs;
    for (const auto& r : records) {
        for (int f = 0; f < 3; ++f) {
            auto t = labharm::tokenize(r.triad.get(static_cast<labharm::Field>(f)));
            if (f == 0) {
                for (const auto& s : r.synonyms) {
                    const auto more = labharm::tokenize(labharm::normalize_text(s));
                    t.insert(t.end(), more.begin(), more.end());
                }
            }
            docs[f].push_back(std::move(t));
        }
    }
    return docs;
}

/// Direct evaluation of sum_t w_t IDF(t) tf(k1+1)/(tf + k1(1-b+b|d|/avgdl)).
inline double bm25(const std::vector<Tokens>& docs, const std::vector<std::pair<std::string, double>>& terms,
                   std::size_t doc, double k1 = 1.2, double b = 0.75) {
    const double n = static_cast<double>(docs.size());
    double total_len = 0;
    for (const auto& d : docs) total_len += static_cast<double>(d.size());
    const double avgdl = n > 0 ? total_len / n : 0.0;
    double score = 0;
    for (const auto& [term, weight] : terms) {
        double df = 0;
        for (const auto& d : docs) {
            if (std::find(d.begin(), d.end(), term) != d.end()) df += 1;
        }
        const double tf = static_cast<double>(std::count(docs[doc].begin(), docs[doc].end(), term));
        if (tf == 0) continue;
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        const double len = static_cast<double>(docs[doc].size());
        const double norm = avgdl > 0 ? len / avgdl : 1.0;
        score += weight * idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
    }
    return score;
}

inline double bm25(const std::vector<Tokens>& docs, const Tokens& terms, std::size_t doc, double k1 = 1.2,
                   double b = 0.75) {
    std::vector<std::pair<std::string, double>> weighted;
    for (const auto& t : terms) weighted.emplace_back(t, 1.0);
    return bm25(docs, weighted, doc, k1, b);
}

/// Optimal string alignment distance by the textbook full-matrix recurrence.
inline std::size_t osa_distance(const std::u32string& a, const std::u32string& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
            if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) {
                d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
            }
        }
    }
    return d[n][m];
}

inline std::size_t osa_distance(const std::string& a, const std::string& b) {
    return osa_distance(labharm::to_code_points(a), labharm::to_code_points(b));
}

/// Fielded BM25 with query-side expansion and fuzzy resolution, evaluated
/// from the raw records.
inline double fielded_bm25(const std::vector<labharm::ReferenceRecord>& records, const labharm::SynonymDictionary& dict,
                           const labharm::Triad& query, const labharm::WeightVector& w, std::size_t doc,
                           std::size_t max_edits) {
    const auto docs = field_documents(records);
    const auto expanded = labharm::expand_query(query, dict);
    const std::array<double, 3> fw{w.w_test, w.w_sample, w.w_unit};
    double total = 0;
    for (int f = 0; f < 3; ++f) {
        std::set<std::string> vocab;
        for (const auto& d : docs[f]) vocab.insert(d.begin(), d.end());
        const auto originals = labharm::tokenize(query.get(static_cast<labharm::Field>(f)));
        std::map<std::string, double> terms;
        for (const auto& t : expanded[f]) {
            if (vocab.count(t)) {
                terms[t] = std::max(terms[t], 1.0);
                continue;
            }
            if (max_edits == 0 || std::find(originals.begin(), originals.end(), t) == originals.end()) continue;
            const auto len = labharm::utf8_length(t);
            if (len < 4) continue;
            const std::size_t cap = std::min<std::size_t>(max_edits, len >= 8 ? 2 : 1);
            for (const auto& v : vocab) {
                const auto e = osa_distance(t, v);
                if (e <= cap) terms[v] = std::max(terms[v], 1.0 / (1.0 + static_cast<double>(e)));
            }
        }
        std::vector<std::pair<std::string, double>> weighted(terms.begin(), terms.end());
        total += fw[f] * bm25(docs[f], weighted, doc);
    }
    return total;
}

/// Single-relevant metrics computed position by position.
struct Metrics {
    double rr = 0, ap = 0;
    std::map<std::size_t, double> precision, recall, success, ndcg, rr_at;
};

inline Metrics metrics(const std::vector<std::string>& ranked, const std::string& gold,
                       const std::vector<std::size_t>& ks) {
    Metrics m;
    std::size_t relevant_seen = 0;
    double precision_sum = 0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i] == gold) {
            ++relevant_seen;
            precision_sum += static_cast<double>(relevant_seen) / static_cast<double>(i + 1);
            if (relevant_seen == 1) m.rr = 1.0 / static_cast<double>(i + 1);
            break;  // ids are unique within a run
        }
    }
    m.ap = precision_sum / 1.0;  // one relevant item
    for (auto k : ks) {
        double hits = 0, dcg = 0, rr = 0;
        for (std::size_t i = 0; i < std::min(k, ranked.size()); ++i) {
            if (ranked[i] == gold) {
                hits += 1;
                dcg += 1.0 / std::log2(static_cast<double>(i) + 2.0);
                if (rr == 0) rr = 1.0 / static_cast<double>(i + 1);
            }
        }
        m.precision[k] = hits / static_cast<double>(k);
        m.recall[k] = hits / 1.0;
        m.success[k] = hits > 0 ? 1.0 : 0.0;
        m.ndcg[k] = dcg / 1.0;  // ideal DCG with one relevant item is 1/log2(2)
        m.rr_at[k] = rr;
    }
    return m;
}

/// Monte-Carlo E[max(0, f - best)], f ~ N(mu, sigma^2): mean and standard error.
inline std::pair<double, double> monte_carlo_ei(double mu, double sigma, double best, std::size_t samples,
                                                labharm::Rng& rng) {
    double sum = 0, sum_sq = 0;
    for (std::size_t i = 0; i < samples; ++i) {
        const double f = mu + sigma * rng.normal();
        const double g = std::max(0.0, f - best);
        sum += g;
        sum_sq += g * g;
    }
    const double n = static_cast<double>(samples);
    const double mean = sum / n;
    const double var = std::max(0.0, sum_sq / n - mean * mean);
    return {mean, std::sqrt(var / n)};
}

/// EI by numerical quadrature of the improvement against the normal density.
inline double quadrature_ei(double mu, double sigma, double best) {
    if (sigma <= 0) return std::max(0.0, mu - best);
    const int n = 200000;
    const double lo = mu - 12 * sigma, hi = mu + 12 * sigma, h = (hi - lo) / n;
    double s = 0;
    for (int i = 0; i <= n; ++i) {
        const double f = lo + h * i;
        const double z = (f - mu) / sigma;
        const double dens = std::exp(-0.5 * z * z) / (sigma * std::sqrt(2 * std::numbers::pi));
        const double wgt = (i == 0 || i == n) ? 0.5 : 1.0;
        s += wgt * std::max(0.0, f - best) * dens;
    }
    return s * h;
}

}  // namespace oracle
