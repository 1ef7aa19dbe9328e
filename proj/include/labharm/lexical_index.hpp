#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "labharm/synonyms.hpp"
#include "labharm/types.hpp"

namespace labharm {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;

    void validate() const;  // k1 >= 0, 0 <= b <= 1
};

/// ln(1 + (N - df + 0.5) / (df + 0.5)); nonnegative for 0 <= df <= N.
double bm25_idf(std::size_t doc_count, std::size_t df);

/// Single-term BM25 contribution without the IDF factor.
double bm25_tf_part(double tf, double doc_length, double avgdl, const Bm25Params& params);

/// Inverted index for one field. Documents are dense indexes 0..N-1.
class FieldIndex {
public:
    struct Posting {
        std::uint32_t doc;
        std::uint32_t tf;
    };

    std::size_t doc_count() const { return doc_lengths_.size(); }
    double avgdl() const { return avgdl_; }
    std::uint32_t doc_length(std::size_t doc) const { return doc_lengths_[doc]; }

    std::optional<std::uint32_t> term_id(std::string_view term) const;
    const std::string& term(std::uint32_t id) const { return vocabulary_[id]; }
    const std::vector<std::string>& vocabulary() const { return vocabulary_; }
    const std::vector<Posting>& postings(std::uint32_t id) const { return postings_[id]; }
    std::size_t df(std::uint32_t id) const { return postings_[id].size(); }
    double idf(std::uint32_t id) const { return idf_[id]; }

    /// Term frequency of a term in a document (0 when absent).
    std::uint32_t tf(std::uint32_t id, std::size_t doc) const;

    /// Vocabulary terms within max_edits of term, using length buckets.
    std::vector<std::pair<std::uint32_t, std::size_t>> fuzzy_neighbours(std::u32string_view term,
                                                                        std::size_t max_edits) const;

    void add_document(std::span<const std::string> tokens);
    void finalize();

    void save(std::ostream& out) const;
    static FieldIndex load(std::istream& in);

private:
    std::vector<std::string> vocabulary_;
    std::vector<std::u32string> vocabulary_cp_;
    std::unordered_map<std::string, std::uint32_t> term_ids_;
    std::vector<std::vector<Posting>> postings_;
    std::vector<double> idf_;
    std::vector<std::uint32_t> doc_lengths_;
    std::vector<std::vector<std::uint32_t>> by_length_;  // code-point length -> term ids
    double avgdl_ = 0.0;
};

/// Query terms of one field after synonym expansion and fuzzy resolution.
struct PreparedField {
    struct Term {
        std::uint32_t id;
        double weight;  // 1 for exact or synonym terms, 1/(1+e) for fuzzy ones
    };
    std::vector<Term> terms;
};

using PreparedQuery = std::array<PreparedField, 3>;

/// Per-field token lists: original tokens first, then tokens of every
/// synonym group hit by the whole field value or by a single token.
std::array<std::vector<std::string>, 3> expand_query(const Triad& query, const SynonymDictionary& dict);

class LexicalIndex {
public:
    LexicalIndex() = default;

    /// Indexes normalized tokens of each field; the test field also receives
    /// every record synonym. Throws DuplicateIdError on repeated ids.
    static LexicalIndex build(std::vector<ReferenceRecord> records, SynonymDictionary dict, Bm25Params params = {});

    std::size_t size() const { return records_.size(); }
    const std::vector<ReferenceRecord>& records() const { return records_; }
    const ReferenceRecord& record(std::size_t doc) const { return records_[doc]; }
    std::optional<std::size_t> find(std::string_view record_id) const;
    const FieldIndex& field(Field f) const { return fields_[static_cast<std::size_t>(f)]; }
    const SynonymDictionary& dictionary() const { return dict_; }
    const Bm25Params& params() const { return params_; }

    /// Raw BM25 of literal query terms against one record's field; terms
    /// unknown to the field contribute 0. Throws UnknownRecord.
    double bm25_field_score(Field f, std::span<const std::string> query_terms, std::string_view record_id) const;

    /// Expands the query with synonyms and resolves unknown tokens (length >=
    /// 4) to vocabulary terms within max_edits (at most 1 below length 8).
    PreparedQuery prepare(const Triad& query, std::size_t max_edits = 1) const;

    /// BM25 of a prepared field against one document.
    double score(Field f, const PreparedField& q, std::size_t doc) const;

    /// Adds the prepared field's BM25 to scores[doc] for every matching doc.
    /// scores must have size() entries.
    void accumulate(Field f, const PreparedField& q, std::span<double> scores) const;

    /// w_test * BM25_test + w_sample * BM25_sample + w_unit * BM25_unit with
    /// synonym expansion and fuzzy matching. Throws UnknownRecord.
    double fielded_bm25(const Triad& query, const WeightVector& weights, std::string_view record_id,
                        std::size_t max_edits = 1) const;

    /// Binary snapshot with a versioned magic header.
    void save(const std::filesystem::path& path) const;
    static LexicalIndex load(const std::filesystem::path& path);

private:
    std::vector<ReferenceRecord> records_;
    std::unordered_map<std::string, std::size_t> id_to_doc_;
    std::array<FieldIndex, 3> fields_;
    SynonymDictionary dict_;
    Bm25Params params_;
};

}  // namespace labharm
