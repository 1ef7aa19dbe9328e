#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "labharm/types.hpp"

namespace labharm {

struct ReferenceRecord;

/// Symmetric synonym groups per category. Terms are stored normalized; a
/// normalized term belongs to at most one group of its category.
class SynonymDictionary {
public:
    using Group = std::vector<std::string>;

    /// Adds a group after normalizing its terms; members that normalize to
    /// the same string collapse into one. Throws OverlapError when a term is
    /// already in another group of the category.
    void add_group(Field category, std::span<const std::string> terms);

    const std::vector<Group>& groups(Field category) const { return groups_[index(category)]; }

    /// Group index of an already-normalized term.
    std::optional<std::size_t> find(std::string_view normalized, Field category) const;

    /// The group containing normalize(term), or the singleton {normalize(term)}.
    Group group_of(std::string_view term, Field category) const;

    /// True when both normalized terms are equal or share a group.
    bool equivalent(std::string_view a_normalized, std::string_view b_normalized, Field category) const;

    /// Copy extended with test-name groups formed by each record's primary
    /// test name and its synonyms. Groups that intersect are merged.
    SynonymDictionary with_record_synonyms(std::span<const ReferenceRecord> records) const;

    /// Text format: one group per line, `<category>: term, term, ...` with
    /// category in {test, sample, unit}; '#' starts a comment line.
    static SynonymDictionary parse(std::istream& in);
    static SynonymDictionary load(const std::filesystem::path& path);
    void write(std::ostream& out) const;

private:
    static constexpr std::size_t index(Field f) { return static_cast<std::size_t>(f); }

    std::vector<Group> groups_[3];
    std::unordered_map<std::string, std::size_t> lookup_[3];
};

}  // namespace labharm
