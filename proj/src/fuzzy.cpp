#include "labharm/fuzzy.hpp"

#include <algorithm>
#include <numeric>

#include "labharm/error.hpp"
#include "labharm/text.hpp"

namespace labharm {

std::size_t damerau_levenshtein(std::u32string_view a, std::u32string_view b, std::size_t cap) {
    if (a.size() > b.size()) std::swap(a, b);
    if (b.size() - a.size() > cap) return cap + 1;
    if (a.empty()) return b.size();

    const std::size_t cols = a.size() + 1;
    // Three rolling rows: two back (transpositions), previous, current.
    std::vector<std::size_t> prev2(cols), prev(cols), cur(cols);
    std::iota(prev.begin(), prev.end(), std::size_t{0});

    for (std::size_t i = 1; i <= b.size(); ++i) {
        cur[0] = i;
        std::size_t row_min = cur[0];
        for (std::size_t j = 1; j < cols; ++j) {
            const std::size_t cost = b[i - 1] == a[j - 1] ? 0 : 1;
            std::size_t v = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + cost});
            if (i > 1 && j > 1 && b[i - 1] == a[j - 2] && b[i - 2] == a[j - 1]) v = std::min(v, prev2[j - 2] + 1);
            cur[j] = v;
            row_min = std::min(row_min, v);
        }
        if (row_min > cap) return cap + 1;
        std::swap(prev2, prev);
        std::swap(prev, cur);
    }
    return std::min(prev[cols - 1], cap + 1);
}

std::size_t damerau_levenshtein(std::string_view a, std::string_view b, std::size_t cap) {
    return damerau_levenshtein(to_code_points(a), to_code_points(b), cap);
}

std::vector<FuzzyMatch> fuzzy_match_terms(std::string_view term, std::span<const std::string> vocabulary,
                                          std::size_t max_edits) {
    if (max_edits > 2) throw InvalidArgument("max_edits must be 0, 1 or 2");
    const auto needle = to_code_points(term);
    std::vector<FuzzyMatch> out;
    for (const auto& v : vocabulary) {
        const auto len = utf8_length(v);
        const auto diff = len > needle.size() ? len - needle.size() : needle.size() - len;
        if (diff > max_edits) continue;
        const auto d = damerau_levenshtein(needle, to_code_points(v), max_edits);
        if (d <= max_edits) out.push_back({v, d});
    }
    return out;
}

}  // namespace labharm
