#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <istream>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <unordered_map>
#include <vector>

#include "labharm/hybrid_retriever.hpp"
#include "labharm/rng.hpp"
#include "labharm/synonyms.hpp"
#include "labharm/types.hpp"

namespace labharm {

/// POS: synonym-preserving; N1: test corrupted; N2: test and sample; N3: all.
enum class CorruptionClass : std::uint8_t { POS = 0, N1 = 1, N2 = 2, N3 = 3 };
enum class Difficulty : std::uint8_t { easy, hard };

std::string_view to_string(CorruptionClass c);
CorruptionClass parse_corruption_class(std::string_view s);
std::string_view to_string(Difficulty d);
Difficulty parse_difficulty(std::string_view s);

struct LabeledPair {
    Triad left;
    Triad right;
    int label = 0;  // 1 compatible, 0 incompatible
    CorruptionClass corruption = CorruptionClass::POS;
    Difficulty difficulty = Difficulty::easy;

    friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

/// Component-wise synonym equivalence of two triads.
bool synonym_equivalent(const Triad& a, const Triad& b, const SynonymDictionary& dict);

/// Exact dictionary check of a pair's label and corruption class: positives
/// differ only within synonym groups; Nk pairs have exactly the class's
/// components outside the source's groups.
bool label_sound(const LabeledPair& pair, const SynonymDictionary& dict);

struct GenerationSchedule {
    struct Stage {
        double until = 1.0;          // stage covers pairs up to this fraction of total
        double hard_fraction = 0.0;  // share of negatives drawn hard
    };

    std::size_t total = 200000;
    double positive_fraction = 0.5;
    std::array<double, 3> negative_fractions{1.0 / 3, 1.0 / 3, 1.0 / 3};  // N1, N2, N3
    std::vector<Stage> ramp{{1.0 / 3, 0.2}, {1.0, 0.5}};

    void validate() const;  // fractions sum to 1; ramp non-decreasing
    double hard_fraction_at(std::size_t index) const;

    /// Class of every pair, chosen by largest deficit so each prefix stays
    /// within one pair of its target counts.
    std::vector<CorruptionClass> class_sequence() const;
};

/// Retrieved triads that share a normalized token with the source but are
/// not synonym-equivalent to it on all three components; at most k.
std::vector<Triad> mine_hard_negatives(const Triad& source, const HybridRetriever& retriever,
                                       const SynonymDictionary& dict, std::size_t k,
                                       const RetrievalConfig& cfg = {});

class PairFactory {
public:
    /// The pool provides sources and replacement components. When a
    /// retriever is given, hard negatives draw replacements from mined
    /// near-miss triads.
    PairFactory(std::vector<Triad> pool, SynonymDictionary dict, const HybridRetriever* retriever = nullptr,
                std::size_t hard_k = 10);

    const SynonymDictionary& dictionary() const { return dict_; }
    const std::vector<Triad>& pool() const { return pool_; }

    /// Replaces a random non-empty subset of the substitutable components
    /// with other members of their synonym groups; identical pair when none
    /// is substitutable.
    LabeledPair make_positive(const Triad& source, Rng& rng) const;

    /// Throws InsufficientPool when the pool lacks replacements outside the
    /// source's synonym groups.
    LabeledPair make_negative(const Triad& source, CorruptionClass cls, Difficulty difficulty, Rng& rng) const;

    /// Deterministic for a seed. Pairs are produced in blocks with
    /// seed-derived sub-streams and emitted in order.
    void generate(const GenerationSchedule& schedule, std::uint64_t seed,
                  const std::function<void(const LabeledPair&)>& sink, std::size_t threads = 1) const;
    std::vector<LabeledPair> generate(const GenerationSchedule& schedule, std::uint64_t seed,
                                      std::size_t threads = 1) const;

private:
    const std::vector<Triad>& mined(std::size_t source_index) const;
    std::string pick_outside(Field f, const std::string& value, Rng& rng) const;
    std::string maybe_synonym(Field f, const std::string& value, Rng& rng, double p) const;

    std::vector<Triad> pool_;
    SynonymDictionary dict_;
    const HybridRetriever* retriever_;
    std::size_t hard_k_;
    std::array<std::vector<std::string>, 3> values_;  // distinct component values
    std::unordered_map<std::string, std::size_t> pool_index_;

    mutable std::mutex mined_mutex_;
    mutable std::unordered_map<std::size_t, std::unique_ptr<std::vector<Triad>>> mined_;
};

/// {"left":{"sample","test","unit"},"right":{...},"label","class","difficulty"}
void write_pair_jsonl(std::ostream& out, const LabeledPair& pair);
std::vector<LabeledPair> read_pairs_jsonl(std::istream& in);

}  // namespace labharm
