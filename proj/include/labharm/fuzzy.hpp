#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace labharm {

/// Restricted Damerau-Levenshtein (optimal string alignment) distance over
/// code points. Returns cap + 1 as soon as the distance provably exceeds cap.
std::size_t damerau_levenshtein(std::u32string_view a, std::u32string_view b, std::size_t cap);
std::size_t damerau_levenshtein(std::string_view a, std::string_view b, std::size_t cap = SIZE_MAX - 1);

struct FuzzyMatch {
    std::string term;
    std::size_t edits = 0;

    /// Score multiplier for a match at this distance: 1 / (1 + edits).
    double weight() const { return 1.0 / (1.0 + static_cast<double>(edits)); }

    friend bool operator==(const FuzzyMatch&, const FuzzyMatch&) = default;
};

/// Vocabulary terms within max_edits (0..2) of term, in vocabulary order.
/// Throws InvalidArgument for max_edits > 2.
std::vector<FuzzyMatch> fuzzy_match_terms(std::string_view term, std::span<const std::string> vocabulary,
                                          std::size_t max_edits);

}  // namespace labharm
