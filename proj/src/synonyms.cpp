#include "labharm/synonyms.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include "labharm/error.hpp"
#include "labharm/text.hpp"

namespace labharm {

void SynonymDictionary::add_group(Field category, std::span<const std::string> terms) {
    const auto c = index(category);
    Group group;
    for (const auto& raw : terms) {
        auto term = normalize_text(raw);
        if (term.empty()) continue;
        if (std::find(group.begin(), group.end(), term) != group.end()) continue;
        if (lookup_[c].contains(term)) {
            throw OverlapError("term '" + term + "' appears in two " + std::string(to_string(category)) + " groups");
        }
        group.push_back(std::move(term));
    }
    if (group.empty()) return;
    const auto gid = groups_[c].size();
    for (const auto& t : group) lookup_[c].emplace(t, gid);
    groups_[c].push_back(std::move(group));
}

std::optional<std::size_t> SynonymDictionary::find(std::string_view normalized, Field category) const {
    const auto& map = lookup_[index(category)];
    if (auto it = map.find(std::string(normalized)); it != map.end()) return it->second;
    return std::nullopt;
}

SynonymDictionary::Group SynonymDictionary::group_of(std::string_view term, Field category) const {
    auto n = normalize_text(term);
    if (auto gid = find(n, category)) return groups_[index(category)][*gid];
    return {std::move(n)};
}

bool SynonymDictionary::equivalent(std::string_view a, std::string_view b, Field category) const {
    if (a == b) return true;
    const auto ga = find(a, category);
    return ga && ga == find(b, category);
}

SynonymDictionary SynonymDictionary::with_record_synonyms(std::span<const ReferenceRecord> records) const {
    // Union-find over test terms; existing groups and record groups both
    // contribute edges.
    std::vector<std::string> terms;
    std::unordered_map<std::string, std::size_t> ids;
    std::vector<std::size_t> parent;
    auto id_of = [&](const std::string& t) {
        auto [it, inserted] = ids.emplace(t, terms.size());
        if (inserted) {
            terms.push_back(t);
            parent.push_back(parent.size());
        }
        return it->second;
    };
    auto root = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto unite = [&](std::size_t a, std::size_t b) {
        a = root(a);
        b = root(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    };

    for (const auto& g : groups(Field::test)) {
        const auto first = id_of(g.front());
        for (const auto& t : g) unite(first, id_of(t));
    }
    for (const auto& r : records) {
        if (r.synonyms.empty()) continue;
        const auto first = id_of(r.triad.test());
        for (const auto& s : r.synonyms) unite(first, id_of(s));
    }

    std::vector<Group> merged;
    std::unordered_map<std::size_t, std::size_t> root_to_group;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto r = root(i);
        auto [it, inserted] = root_to_group.emplace(r, merged.size());
        if (inserted) merged.emplace_back();
        merged[it->second].push_back(terms[i]);
    }

    SynonymDictionary out;
    for (auto f : {Field::sample, Field::unit}) {
        out.groups_[index(f)] = groups_[index(f)];
        out.lookup_[index(f)] = lookup_[index(f)];
    }
    for (auto& g : merged) {
        if (g.size() >= 2) out.add_group(Field::test, g);
    }
    return out;
}

SynonymDictionary SynonymDictionary::parse(std::istream& in) {
    SynonymDictionary dict;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto colon = t.find(':');
        if (colon == std::string::npos) {
            throw ParseError("synonym file line " + std::to_string(lineno) + ": missing category prefix");
        }
        Field category;
        try {
            category = parse_field(trim(t.substr(0, colon)));
        } catch (const UnknownField&) {
            throw ParseError("synonym file line " + std::to_string(lineno) + ": unknown category '" +
                             trim(t.substr(0, colon)) + "'");
        }
        std::vector<std::string> members;
        for (const auto& part : split(std::string_view(t).substr(colon + 1), ',')) {
            auto m = trim(part);
            if (!m.empty()) members.push_back(std::move(m));
        }
        if (members.empty()) {
            throw ParseError("synonym file line " + std::to_string(lineno) + ": empty group");
        }
        try {
            dict.add_group(category, members);
        } catch (const OverlapError& e) {
            throw OverlapError("synonym file line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return dict;
}

SynonymDictionary SynonymDictionary::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    return parse(in);
}

void SynonymDictionary::write(std::ostream& out) const {
    for (auto f : kFields) {
        for (const auto& g : groups(f)) {
            out << to_string(f) << ':';
            for (std::size_t i = 0; i < g.size(); ++i) out << (i ? ", " : " ") << g[i];
            out << '\n';
        }
    }
}

}  // namespace labharm
