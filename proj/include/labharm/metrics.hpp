#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace labharm {

/// One ranked result list per query.
struct Run {
    std::string query_id;
    std::vector<std::string> ranked_ids;
};

/// query id -> the single relevant record id.
using GoldSet = std::map<std::string, std::string>;

/// 1 / rank of gold within ranked_ids (1-based); 0 when absent.
double reciprocal_rank(const std::vector<std::string>& ranked_ids, const std::string& gold);

/// 1-based rank of gold, 0 when absent.
std::size_t gold_rank(const std::vector<std::string>& ranked_ids, const std::string& gold);

struct AtK {
    std::size_t k = 0;
    double precision = 0.0;
    double recall = 0.0;
    double success = 0.0;
    double ndcg = 0.0;
    double mrr = 0.0;  // reciprocal rank truncated at k
};

struct MetricReport {
    std::vector<AtK> at;  // ascending k
    double mrr = 0.0;
    double map = 0.0;
    std::size_t queries = 0;
    std::size_t queries_with_results = 0;

    const AtK& at_k(std::size_t k) const;  // throws InvalidArgument
    nlohmann::json to_json() const;
};

inline const std::vector<std::size_t> kDefaultCutoffs{1, 3, 5, 10};

/// Single-relevant definitions: P@k = hit/k, R@k = Success@k = hit,
/// NDCG@k = 1/log2(rank+1) within k, MAP = mean average precision (with one
/// relevant item AP is the reciprocal rank). Throws MissingGold.
MetricReport compute_report(const std::vector<Run>& runs, const GoldSet& gold,
                            const std::vector<std::size_t>& ks = kDefaultCutoffs);

/// Aligned text table: one row per labelled report.
std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows);

/// Runs file: JSON lines {query_id, ranked: [ids...]}.
std::vector<Run> read_runs(std::istream& in);
std::vector<Run> load_runs(const std::filesystem::path& path);
/// Gold file: CSV with header `query_id,record_id`.
GoldSet read_gold(std::istream& in);
GoldSet load_gold(const std::filesystem::path& path);

/// Parses "1,3,5,10".
std::vector<std::size_t> parse_cutoffs(const std::string& text);

}  // namespace labharm
