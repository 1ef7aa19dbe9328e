#pragma once

#include <filesystem>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <mutex>
#include <shared_mutex>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "labharm/embedding.hpp"
#include "labharm/hybrid_retriever.hpp"
#include "labharm/synonyms.hpp"
#include "labharm/types.hpp"

namespace labharm {

/// "<s> T1 </s></s> T2 </s>" with Ti = "TEST: {test} SAMPLE: {sample} UNIT: {unit}".
struct PairEncoding {
    static constexpr std::size_t kTokenBudget = 384;

    std::string text;
    Triad left;   // as encoded (after truncation)
    Triad right;
    bool truncated = false;
};

/// Whitespace tokens count against the budget. Over-budget pairs lose value
/// tokens from the right end of the longest field value until they fit;
/// markers and labels are never dropped.
PairEncoding encode_pair(const Triad& query, const Triad& candidate,
                         std::size_t token_budget = PairEncoding::kTokenBudget);

/// Inverse of encode_pair's text form. Throws ParseError when markers or
/// labels are missing.
std::pair<Triad, Triad> decode_pair(std::string_view text);

/// Probability that two triads denote the same measurement convention.
class CompatibilityScorer {
public:
    virtual ~CompatibilityScorer() = default;
    virtual double score(const PairEncoding& pair) const = 0;
    virtual std::vector<double> score_batch(std::span<const PairEncoding> pairs) const;
    virtual std::string version() const = 0;
};

/// Per-component and cross-component similarity features of a triad pair.
/// Per component: synonym-group hit, token Jaccard, edit similarity and
/// n-gram cosine, each the best over both components' synonym groups.
class FeatureExtractor {
public:
    explicit FeatureExtractor(SynonymDictionary dict, std::size_t embedding_dimension = 64);
    FeatureExtractor(const FeatureExtractor& o) : dict_(o.dict_), embedder_(o.embedder_) {}
    FeatureExtractor& operator=(const FeatureExtractor& o) {
        if (this != &o) {
            dict_ = o.dict_;
            embedder_ = o.embedder_;
            std::unique_lock lock(cache_mutex_);
            cache_.clear();
        }
        return *this;
    }

    static const std::vector<std::string>& names();
    static std::size_t size() { return names().size(); }

    std::vector<double> extract(const Triad& left, const Triad& right) const;

    const SynonymDictionary& dictionary() const { return dict_; }

private:
    const Embedding& embedding(const std::string& term) const;

    SynonymDictionary dict_;
    HashingEmbedder embedder_;
    mutable std::shared_mutex cache_mutex_;
    mutable std::unordered_map<std::string, Embedding> cache_;  // node-based: references stay valid
};

/// Linear model over FeatureExtractor output with a sigmoid head.
struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;

    double logit(std::span<const double> features) const;
    double probability(std::span<const double> features) const;
};

double sigmoid(double z);

class ReferenceScorer final : public CompatibilityScorer {
public:
    static constexpr const char* kFormatVersion = "labharm-reference-scorer/1";

    explicit ReferenceScorer(SynonymDictionary dict);
    ReferenceScorer(SynonymDictionary dict, LinearModel model);

    double score(const PairEncoding& pair) const override;
    double score(const Triad& left, const Triad& right) const;
    std::string version() const override { return kFormatVersion; }

    const FeatureExtractor& features() const { return extractor_; }
    const LinearModel& model() const { return model_; }
    LinearModel& model() { return model_; }

    /// Extra provenance written to the model file.
    nlohmann::json trained_on = nlohmann::json::object();
    nlohmann::json metrics = nlohmann::json::object();

    /// {version, feature_names, weights, bias, trained_on, metrics}
    nlohmann::json to_json() const;
    static ReferenceScorer from_json(const nlohmann::json& j, SynonymDictionary dict);
    void save(const std::filesystem::path& path) const;
    static ReferenceScorer load(const std::filesystem::path& path, SynonymDictionary dict);

private:
    FeatureExtractor extractor_;
    LinearModel model_;
};

/// Scores through an external service: POST `/score` with JSON-lines
/// {pair_id, left, right}; the response carries {pair_id, p} lines.
class HttpScorer final : public CompatibilityScorer {
public:
    HttpScorer(std::string host, int port, std::string version = "external");
    double score(const PairEncoding& pair) const override;
    std::vector<double> score_batch(std::span<const PairEncoding> pairs) const override;
    std::string version() const override { return version_; }

private:
    std::string host_;
    int port_;
    std::string version_;
};

/// Wire-format helpers shared by the HTTP and stdio transports.
nlohmann::json score_request(std::string_view pair_id, const Triad& left, const Triad& right);
/// Answers every request line in `in` with a response line in `out`.
void serve_score_lines(const CompatibilityScorer& scorer, std::istream& in, std::ostream& out);

struct RerankOptions {
    double lambda = 0.3;        // weight of the normalized retrieval score
    bool fuse = true;           // lambda fusion of retrieval and scorer
    bool override_top1 = true;  // promote the scorer's favourite over retrieval top-1
};

/// final = lambda * retrieval_norm + (1 - lambda) * p for every candidate;
/// stable sort by final descending, ties by record id. Candidates must carry
/// retrieval_norm (normalize_candidate_scores). Throws EmptyCandidateList.
std::vector<RankedCandidate> rerank(const Triad& query, std::vector<RankedCandidate> candidates,
                                    const std::vector<Triad>& candidate_triads, const CompatibilityScorer& scorer,
                                    double lambda);

struct OverrideOutcome {
    std::vector<RankedCandidate> ranking;
    TagStatus tag = TagStatus::Pending;
    bool fusion_changed_top = false;  // lambda fusion alone moved a new record to rank 1
    bool override_fired = false;      // the top-1 override promoted a candidate
};

/// The scorer's favourite in `reranked` (highest rerank_score, earliest on
/// ties) is moved to rank 1 of `original` when it differs from the current
/// top-1 and its compatibility score is strictly higher (tag Reranked).
/// Otherwise `original` is returned unchanged (tag Pending). Both lists
/// must cover the same candidates and carry rerank_score.
OverrideOutcome override_top1(const std::vector<RankedCandidate>& original,
                              const std::vector<RankedCandidate>& reranked);

/// Full post-retrieval stage: normalize, score, lambda-fuse, then apply the
/// override to the fused list. Tag is Reranked when the final top-1 differs
/// from the retrieval top-1, Missing for an empty list, else Pending.
OverrideOutcome apply_reranker(const Triad& query, const std::vector<RankedCandidate>& retrieved,
                               const LexicalIndex& index, const CompatibilityScorer& scorer,
                               const RerankOptions& options);

}  // namespace labharm
