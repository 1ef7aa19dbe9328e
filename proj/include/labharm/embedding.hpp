#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "labharm/types.hpp"

namespace labharm {

using Embedding = std::vector<double>;

/// dot(a, b) / (|a| |b|); 0 when either vector is all-zero. Throws
/// DimensionMismatch.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// "TEST: {test} SAMPLE: {sample} UNIT: {unit}" over normalized fields.
std::string record_text(const Triad& triad);

/// Text-to-vector contract. Implementations must return identical vectors
/// for identical text and be callable concurrently.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual std::size_t dimension() const = 0;
    virtual Embedding embed(std::string_view text) const = 0;
    /// Identifies the model/version; stores built by different providers
    /// are not comparable.
    virtual std::string fingerprint() const = 0;
};

/// Character n-gram hashing embedder: n-grams (n = 2..4, with boundary
/// markers) of the text are hashed with FNV-1a into `dimension` signed
/// buckets and the result is L2-normalized. Text in record_text form is
/// split at its labels and each field's n-grams are salted with the field.
/// Platform independent.
class HashingEmbedder final : public EmbeddingProvider {
public:
    explicit HashingEmbedder(std::size_t dimension = 128);
    std::size_t dimension() const override { return dimension_; }
    Embedding embed(std::string_view text) const override;
    std::string fingerprint() const override;

private:
    std::size_t dimension_;
};

/// One vector per reference record, all of one dimension.
class VectorStore {
public:
    VectorStore() = default;

    /// Embeds record_text of every record.
    static VectorStore build(std::span<const ReferenceRecord> records, const EmbeddingProvider& provider);

    /// Precomputed-vectors file: header `dim=<D>`, then
    /// `<record_id>\t<v1,v2,...,vD>` per line.
    static VectorStore read(std::istream& in, std::string fingerprint = "file");
    static VectorStore load(const std::filesystem::path& path);
    void write(std::ostream& out) const;

    std::size_t size() const { return ids_.size(); }
    std::size_t dimension() const { return dimension_; }
    const std::string& fingerprint() const { return fingerprint_; }
    const std::vector<std::string>& ids() const { return ids_; }
    std::span<const double> vector(std::size_t i) const { return {data_.data() + i * dimension_, dimension_}; }
    std::optional<std::size_t> find(std::string_view id) const;

    /// max(0, cosine) against every stored vector, in store order.
    std::vector<double> scores(std::span<const double> query) const;

    /// Reorders the store to match record order; throws IndexMismatch when
    /// the id sets differ.
    VectorStore aligned_to(std::span<const ReferenceRecord> records) const;

    void add(std::string id, std::span<const double> v);

private:
    std::size_t dimension_ = 0;
    std::string fingerprint_;
    std::vector<std::string> ids_;
    std::vector<double> data_;
    std::vector<double> norms_;
    std::unordered_map<std::string, std::size_t> lookup_;
};

/// Clipped cosine of the query against every record, keyed by record id.
std::unordered_map<std::string, double> semantic_scores(const VectorStore& store, std::span<const double> query);

}  // namespace labharm
