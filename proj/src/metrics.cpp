#include "labharm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "labharm/csv.hpp"
#include "labharm/error.hpp"
#include "labharm/text.hpp"

namespace labharm {

std::size_t gold_rank(const std::vector<std::string>& ranked_ids, const std::string& gold) {
    const auto it = std::find(ranked_ids.begin(), ranked_ids.end(), gold);
    return it == ranked_ids.end() ? 0 : static_cast<std::size_t>(it - ranked_ids.begin()) + 1;
}

double reciprocal_rank(const std::vector<std::string>& ranked_ids, const std::string& gold) {
    const auto r = gold_rank(ranked_ids, gold);
    return r == 0 ? 0.0 : 1.0 / static_cast<double>(r);
}

const AtK& MetricReport::at_k(std::size_t k) const {
    for (const auto& a : at) {
        if (a.k == k) return a;
    }
    throw InvalidArgument("no metrics at k=" + std::to_string(k));
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j{{"mrr", mrr}, {"map", map}, {"queries", queries}, {"queries_with_results", queries_with_results}};
    for (const auto& a : at) {
        const auto k = std::to_string(a.k);
        j["precision@" + k] = a.precision;
        j["recall@" + k] = a.recall;
        j["success@" + k] = a.success;
        j["ndcg@" + k] = a.ndcg;
        j["mrr@" + k] = a.mrr;
    }
    return j;
}

namespace {

// Average precision over a ranked list with a set of relevant ids.
double average_precision(const std::vector<std::string>& ranked, const std::string& gold) {
    std::size_t hits = 0;
    double sum = 0.0;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        if (ranked[i] == gold) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(i + 1);
            break;  // one relevant id
        }
    }
    return sum;  // divided by |relevant| = 1
}

}  // namespace

MetricReport compute_report(const std::vector<Run>& runs, const GoldSet& gold, const std::vector<std::size_t>& ks_in) {
    auto ks = ks_in;
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    for (auto k : ks) {
        if (k == 0) throw InvalidArgument("cutoffs must be >= 1");
    }
    MetricReport rep;
    rep.queries = runs.size();
    rep.at.resize(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) rep.at[i].k = ks[i];
    if (runs.empty()) return rep;

    for (const auto& run : runs) {
        const auto g = gold.find(run.query_id);
        if (g == gold.end()) throw MissingGold("no gold label for query '" + run.query_id + "'");
        if (!run.ranked_ids.empty()) ++rep.queries_with_results;
        const auto r = gold_rank(run.ranked_ids, g->second);
        rep.mrr += r ? 1.0 / static_cast<double>(r) : 0.0;
        rep.map += average_precision(run.ranked_ids, g->second);
        for (auto& a : rep.at) {
            const bool hit = r != 0 && r <= a.k;
            if (!hit) continue;
            a.precision += 1.0 / static_cast<double>(a.k);
            a.recall += 1.0;
            a.success += 1.0;
            a.ndcg += 1.0 / std::log2(static_cast<double>(r) + 1.0);
            a.mrr += 1.0 / static_cast<double>(r);
        }
    }
    const double n = static_cast<double>(runs.size());
    rep.mrr /= n;
    rep.map /= n;
    for (auto& a : rep.at) {
        a.precision /= n;
        a.recall /= n;
        a.success /= n;
        a.ndcg /= n;
        a.mrr /= n;
    }
    return rep;
}

std::string format_table(const std::vector<std::pair<std::string, MetricReport>>& rows) {
    if (rows.empty()) return {};
    std::vector<std::string> header{"Method", "MRR", "MAP"};
    for (const auto& a : rows.front().second.at) {
        const auto k = std::to_string(a.k);
        for (const char* m : {"P@", "R@", "S@", "NDCG@"}) header.push_back(m + k);
    }
    std::vector<std::vector<std::string>> cells{header};
    auto fmt = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.4f", v);
        return std::string(buf);
    };
    for (const auto& [name, rep] : rows) {
        std::vector<std::string> row{name, fmt(rep.mrr), fmt(rep.map)};
        for (const auto& a : rep.at) {
            for (double v : {a.precision, a.recall, a.success, a.ndcg}) row.push_back(fmt(v));
        }
        cells.push_back(std::move(row));
    }
    std::vector<std::size_t> width(header.size(), 0);
    for (const auto& row : cells) {
        for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
    }
    std::string out;
    for (std::size_t r = 0; r < cells.size(); ++r) {
        for (std::size_t i = 0; i < cells[r].size(); ++i) {
            const auto& c = cells[r][i];
            if (i == 0) {
                out += c + std::string(width[i] - c.size(), ' ');
            } else {
                out += "  " + std::string(width[i] - c.size(), ' ') + c;
            }
        }
        out += '\n';
        if (r == 0) {
            std::size_t total = 0;
            for (auto w : width) total += w + 2;
            out += std::string(total - 2, '-') + '\n';
        }
    }
    out += "P@k = hits/k; S@k = share of queries with the gold record in the top k.\n";
    return out;
}

std::vector<Run> read_runs(std::istream& in) {
    std::vector<Run> runs;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            runs.push_back({j.at("query_id").get<std::string>(), j.at("ranked").get<std::vector<std::string>>()});
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("runs line " + std::to_string(n) + ": " + e.what());
        }
    }
    return runs;
}

std::vector<Run> load_runs(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    return read_runs(in);
}

GoldSet read_gold(std::istream& in) {
    GoldSet gold;
    auto header = csv::read_row(in);
    if (!header || header->size() != 2 || (*header)[0] != "query_id" || (*header)[1] != "record_id") {
        throw ParseError("gold file must start with header query_id,record_id");
    }
    std::size_t n = 1;
    while (auto r = csv::read_row(in)) {
        ++n;
        const auto& row = *r;
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != 2) throw ParseError("gold line " + std::to_string(n) + ": expected 2 fields");
        if (!gold.emplace(row[0], row[1]).second) {
            throw DuplicateIdError("gold line " + std::to_string(n) + ": duplicate query id '" + row[0] + "'");
        }
    }
    return gold;
}

GoldSet load_gold(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    return read_gold(in);
}

std::vector<std::size_t> parse_cutoffs(const std::string& text) {
    std::vector<std::size_t> ks;
    for (const auto& part : split(text, ',')) {
        const auto t = trim(part);
        if (t.empty()) continue;
        std::size_t pos = 0;
        unsigned long v = 0;
        try {
            v = std::stoul(std::string(t), &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos != t.size() || v == 0) throw InvalidArgument("bad cutoff '" + std::string(t) + "'");
        ks.push_back(v);
    }
    if (ks.empty()) throw InvalidArgument("no cutoffs given");
    return ks;
}

}  // namespace labharm
