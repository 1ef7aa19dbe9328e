#pragma once

#include <chrono>
#include <filesystem>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "labharm/config.hpp"
#include "labharm/hybrid_retriever.hpp"
#include "labharm/pair_factory.hpp"
#include "labharm/records.hpp"
#include "labharm/reranker.hpp"

namespace labharm {

class Harmonizer;

struct PipelineConfig {
    std::filesystem::path reference_csv;
    std::filesystem::path synonyms;
    std::filesystem::path vectors;  // empty: hashing embedder of embedding_dimension
    std::size_t embedding_dimension = 128;
    std::filesystem::path model;    // empty: no reranking
    std::filesystem::path weights;  // JSON weight vector; overrides the inline weights
    WeightVector inline_weights;
    bool tune_on_startup = false;
    std::filesystem::path validation_queries;
    std::filesystem::path validation_gold;
    std::size_t tuning_budget = 120;

    RetrievalConfig retrieval;
    RerankOptions rerank;

    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path results = "results.jsonl";
    std::filesystem::path feedback_log = "feedback.jsonl";
    std::filesystem::path ui_dir;  // static files served at / when set

    std::size_t threads = 0;
    std::uint64_t seed = 42;

    /// Throws InvalidArgument for out-of-range values and FileError for
    /// referenced files that do not exist.
    void validate() const;
    static PipelineConfig from(const ConfigFile& file);
};

WeightVector load_weights(const std::filesystem::path& path);
void save_weights(const std::filesystem::path& path, const WeightVector& w);
nlohmann::json weights_json(const WeightVector& w);
WeightVector weights_from_json(const nlohmann::json& j);

/// Loaded retrieval stack: dictionary (file groups plus record synonyms),
/// lexical index, vectors, retriever, optional scorer and the weights in use.
class PipelineRuntime {
public:
    /// Loads everything the config references. Weights come from the
    /// weights file, else tuning on the validation set when
    /// tune_on_startup is set, else the inline weights.
    static std::unique_ptr<PipelineRuntime> load(const PipelineConfig& cfg);

    const SynonymDictionary& dictionary() const { return lexical_.dictionary(); }
    const LexicalIndex& lexical() const { return lexical_; }
    const HybridRetriever& retriever() const { return *retriever_; }
    const ReferenceScorer* scorer() const { return scorer_ ? &*scorer_ : nullptr; }
    const RetrievalConfig& retrieval() const { return retrieval_; }
    const RerankOptions& rerank() const { return rerank_; }
    Harmonizer harmonizer() const;

private:
    LexicalIndex lexical_;
    std::unique_ptr<HashingEmbedder> embedder_;
    VectorStore vectors_;
    std::unique_ptr<HybridRetriever> retriever_;
    std::optional<ReferenceScorer> scorer_;
    RetrievalConfig retrieval_;
    RerankOptions rerank_;
};

// ---------------------------------------------------------------- preprocess

struct Reject {
    std::size_t line = 0;
    std::string id;
    std::string reason;
};

struct PreprocessResult {
    std::vector<QueryRecord> queries;
    std::vector<Reject> rejects;
};

/// True for the code-hint shape `^\d{1,5}-\d$`.
bool valid_code_hint(std::string_view code);

/// Validates and normalizes rows. Rejected: empty test, malformed
/// code_hint, invalid frequency, incomplete/invalid/negative/inconsistent
/// stats, duplicate id. Rows with equal triads collapse into the first
/// one with summed frequency. Rows without an id get "q<line>".
PreprocessResult preprocess(std::span<const RawQueryRow> rows);
PreprocessResult preprocess_file(const std::filesystem::path& path);  // FileError, ParseError

void write_rejects(std::ostream& out, std::span<const Reject> rejects);  // CSV line,id,reason
void write_queries(std::ostream& out, std::span<const QueryRecord> queries);
std::vector<QueryRecord> load_queries(const std::filesystem::path& path);  // preprocess, rejects ignored

// ---------------------------------------------------------------- harmonize

struct HarmonizationResult {
    std::string query_id;
    Triad query;
    std::vector<RankedCandidate> candidates;
    std::vector<Triad> candidate_triads;
    std::optional<std::string> chosen;
    TagStatus tag = TagStatus::Missing;
    std::string decided_by = "system";
    std::string rule = "none";  // which reranking rule moved the top-1
    std::optional<std::string> error;
    std::string timestamp;  // kept out of the results file

    nlohmann::json to_json() const;
    static HarmonizationResult from_json(const nlohmann::json& j);
};

class Harmonizer {
public:
    /// scorer may be null (no reranking).
    Harmonizer(const HybridRetriever& retriever, const CompatibilityScorer* scorer, RetrievalConfig retrieval,
               RerankOptions rerank);

    /// Never throws for query-level failures; they are recorded in error.
    HarmonizationResult harmonize(const QueryRecord& query) const;

    /// Parallel across queries; output follows input order.
    std::vector<HarmonizationResult> harmonize_batch(std::span<const QueryRecord> queries,
                                                     std::size_t threads) const;

private:
    const HybridRetriever* retriever_;
    const CompatibilityScorer* scorer_;
    RetrievalConfig retrieval_;
    RerankOptions rerank_;
};

/// Results file (JSON lines, byte-deterministic) and a timestamp sidecar
/// `{query_id, timestamp}` next to it.
void write_results(const std::filesystem::path& path, std::span<const HarmonizationResult> results);
std::vector<HarmonizationResult> read_results(const std::filesystem::path& path);
std::filesystem::path timestamp_sidecar(const std::filesystem::path& results);

/// Runs file for evaluate: {query_id, ranked}.
void write_runs(std::ostream& out, std::span<const HarmonizationResult> results);

std::string utc_timestamp();

// ---------------------------------------------------------------- feedback

struct FeedbackEvent {
    std::string query_id;
    Triad query;
    std::optional<std::string> candidate_id;
    std::optional<Triad> candidate;
    std::string verdict;  // accept | reject
    std::string reviewer;
    std::string timestamp;

    nlohmann::json to_json() const;
    static FeedbackEvent from_json(const nlohmann::json& j);
};

/// Append-only JSON-lines log. Each event is written as one line and
/// flushed under a lock.
class FeedbackLog {
public:
    explicit FeedbackLog(std::filesystem::path path);
    void append(const FeedbackEvent& e);
    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

    static std::vector<FeedbackEvent> read(const std::filesystem::path& path);  // FileError, ParseError

private:
    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::size_t count_ = 0;
};

/// accept -> label 1 (POS); reject -> label 0 (N1). Events without a
/// candidate triad are skipped; duplicates by (query, candidate, verdict)
/// are dropped.
std::vector<LabeledPair> export_feedback_pairs(std::span<const FeedbackEvent> events);

}  // namespace labharm
