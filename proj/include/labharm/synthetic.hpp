#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "labharm/metrics.hpp"
#include "labharm/records.hpp"
#include "labharm/rng.hpp"
#include "labharm/synonyms.hpp"
#include "labharm/types.hpp"

namespace labharm {

struct SyntheticConfig {
    std::size_t records = 2000;
    std::size_t queries = 500;
    std::size_t validation_queries = 200;
    std::uint64_t seed = 2024;

    double test_synonym_rate = 0.45;
    double sample_synonym_rate = 0.7;
    double unit_synonym_rate = 0.7;
    double typo_rate = 0.35;            // test name
    double double_typo_rate = 0.3;      // share of test typos with a second edit
    double component_typo_rate = 0.25;  // sample and unit, each
    double context_rate = 0.2;          // sample word leaks into the test name
    double qualifier_rate = 0.2;        // trailing qualifier such as "level"
    double noise_rate = 0.3;            // case and whitespace noise per component
};

/// Reference database with sibling records (one analyte across samples and
/// units, plus modifier variants) and corrupted queries with known gold.
struct Benchmark {
    std::vector<ReferenceRecord> records;
    SynonymDictionary dictionary;  // seed groups extended with record synonyms
    std::vector<RawQueryRow> queries;
    GoldSet gold;
    std::vector<RawQueryRow> validation_queries;
    GoldSet validation_gold;
};

/// Deterministic for a seed. Throws InvalidArgument when more records or
/// queries are requested than the analyte catalogue supports.
Benchmark make_benchmark(const SynonymDictionary& seed_dictionary, const SyntheticConfig& cfg = {});

/// Writes reference.csv, synonyms.txt, queries.csv, gold.csv,
/// validation_queries.csv and validation_gold.csv into dir.
void write_benchmark(const Benchmark& b, const std::filesystem::path& dir);
Benchmark load_benchmark(const std::filesystem::path& dir);

/// Queries whose rows pass validation, as QueryRecords (no dedup).
std::vector<QueryRecord> benchmark_queries(const std::vector<RawQueryRow>& rows);

/// One edit (delete, transpose, substitute or insert) inside the longest
/// token of at least four letters; identity when there is none.
std::string inject_typo(const std::string& text, Rng& rng);

}  // namespace labharm
