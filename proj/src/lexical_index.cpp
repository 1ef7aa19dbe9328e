#include "labharm/lexical_index.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "binary_io.hpp"
#include "labharm/error.hpp"
#include "labharm/fuzzy.hpp"
#include "labharm/records.hpp"
#include "labharm/text.hpp"

namespace labharm {

namespace {

constexpr char kMagic[8] = {'L', 'H', 'B', 'M', '2', '5', 'I', 'X'};
constexpr std::uint32_t kSnapshotVersion = 1;

}  // namespace

void Bm25Params::validate() const {
    if (!(k1 >= 0.0) || !(b >= 0.0 && b <= 1.0)) throw InvalidArgument("BM25 parameters require k1 >= 0, 0 <= b <= 1");
}

double bm25_idf(std::size_t doc_count, std::size_t df) {
    const double n = static_cast<double>(doc_count);
    const double d = static_cast<double>(df);
    return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

double bm25_tf_part(double tf, double doc_length, double avgdl, const Bm25Params& p) {
    if (tf <= 0.0) return 0.0;
    const double rel = avgdl > 0.0 ? doc_length / avgdl : 1.0;
    return tf * (p.k1 + 1.0) / (tf + p.k1 * (1.0 - p.b + p.b * rel));
}

// ---------------------------------------------------------------- FieldIndex

std::optional<std::uint32_t> FieldIndex::term_id(std::string_view term) const {
    if (auto it = term_ids_.find(std::string(term)); it != term_ids_.end()) return it->second;
    return std::nullopt;
}

std::uint32_t FieldIndex::tf(std::uint32_t id, std::size_t doc) const {
    const auto& list = postings_[id];
    auto it = std::lower_bound(list.begin(), list.end(), doc,
                               [](const Posting& p, std::size_t d) { return p.doc < d; });
    return it != list.end() && it->doc == doc ? it->tf : 0;
}

void FieldIndex::add_document(std::span<const std::string> tokens) {
    const auto doc = static_cast<std::uint32_t>(doc_lengths_.size());
    doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    for (const auto& t : tokens) {
        auto [it, inserted] = term_ids_.emplace(t, static_cast<std::uint32_t>(vocabulary_.size()));
        if (inserted) {
            vocabulary_.push_back(t);
            postings_.emplace_back();
        }
        auto& list = postings_[it->second];
        if (!list.empty() && list.back().doc == doc) {
            ++list.back().tf;
        } else {
            list.push_back({doc, 1});
        }
    }
}

void FieldIndex::finalize() {
    const auto n = doc_lengths_.size();
    const double total = std::accumulate(doc_lengths_.begin(), doc_lengths_.end(), 0.0);
    avgdl_ = n ? total / static_cast<double>(n) : 0.0;
    idf_.resize(vocabulary_.size());
    vocabulary_cp_.resize(vocabulary_.size());
    by_length_.clear();
    for (std::uint32_t id = 0; id < vocabulary_.size(); ++id) {
        idf_[id] = bm25_idf(n, postings_[id].size());
        vocabulary_cp_[id] = to_code_points(vocabulary_[id]);
        const auto len = vocabulary_cp_[id].size();
        if (by_length_.size() <= len) by_length_.resize(len + 1);
        by_length_[len].push_back(id);
    }
}

std::vector<std::pair<std::uint32_t, std::size_t>> FieldIndex::fuzzy_neighbours(std::u32string_view term,
                                                                               std::size_t max_edits) const {
    std::vector<std::pair<std::uint32_t, std::size_t>> out;
    const auto lo = term.size() > max_edits ? term.size() - max_edits : 0;
    const auto hi = std::min(term.size() + max_edits, by_length_.empty() ? 0 : by_length_.size() - 1);
    for (auto len = lo; len <= hi && len < by_length_.size(); ++len) {
        for (auto id : by_length_[len]) {
            const auto d = damerau_levenshtein(term, vocabulary_cp_[id], max_edits);
            if (d <= max_edits) out.emplace_back(id, d);
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

void FieldIndex::save(std::ostream& out) const {
    binary::put<std::uint64_t>(out, vocabulary_.size());
    for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
        binary::put_string(out, vocabulary_[i]);
        binary::put_vector(out, postings_[i]);
    }
    binary::put_vector(out, doc_lengths_);
}

FieldIndex FieldIndex::load(std::istream& in) {
    FieldIndex f;
    const auto terms = binary::get<std::uint64_t>(in);
    for (std::uint64_t i = 0; i < terms; ++i) {
        auto t = binary::get_string(in);
        f.term_ids_.emplace(t, static_cast<std::uint32_t>(i));
        f.vocabulary_.push_back(std::move(t));
        f.postings_.push_back(binary::get_vector<Posting>(in));
    }
    f.doc_lengths_ = binary::get_vector<std::uint32_t>(in);
    for (const auto& list : f.postings_) {
        for (const auto& p : list) {
            if (p.doc >= f.doc_lengths_.size()) throw ParseError("snapshot posting references unknown document");
        }
    }
    f.finalize();
    return f;
}

// ---------------------------------------------------------------- expansion

std::array<std::vector<std::string>, 3> expand_query(const Triad& query, const SynonymDictionary& dict) {
    std::array<std::vector<std::string>, 3> out;
    for (auto f : kFields) {
        auto& terms = out[static_cast<std::size_t>(f)];
        const auto& value = query.get(f);
        const auto tokens = tokenize(value);
        std::unordered_set<std::string> seen;
        auto push = [&](const std::string& t) {
            if (seen.insert(t).second) terms.push_back(t);
        };
        for (const auto& t : tokens) push(t);

        std::vector<std::size_t> hit_groups;
        auto hit = [&](std::string_view term) {
            if (auto g = dict.find(term, f); g && std::find(hit_groups.begin(), hit_groups.end(), *g) == hit_groups.end()) {
                hit_groups.push_back(*g);
            }
        };
        if (!value.empty()) hit(value);
        for (const auto& t : tokens) hit(t);
        for (auto g : hit_groups) {
            for (const auto& member : dict.groups(f)[g]) {
                for (const auto& t : tokenize(member)) push(t);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------- LexicalIndex

LexicalIndex LexicalIndex::build(std::vector<ReferenceRecord> records, SynonymDictionary dict, Bm25Params params) {
    params.validate();
    LexicalIndex idx;
    idx.params_ = params;
    idx.dict_ = std::move(dict);
    idx.records_ = std::move(records);
    idx.id_to_doc_.reserve(idx.records_.size());
    for (std::size_t i = 0; i < idx.records_.size(); ++i) {
        const auto& r = idx.records_[i];
        if (!idx.id_to_doc_.emplace(r.id, i).second) throw DuplicateIdError("duplicate record id '" + r.id + "'");
        for (auto f : kFields) {
            auto tokens = tokenize(r.triad.get(f));
            if (f == Field::test) {
                for (const auto& s : r.synonyms) {
                    auto extra = tokenize(normalize_text(s));
                    tokens.insert(tokens.end(), extra.begin(), extra.end());
                }
            }
            idx.fields_[static_cast<std::size_t>(f)].add_document(tokens);
        }
    }
    for (auto& f : idx.fields_) f.finalize();
    return idx;
}

std::optional<std::size_t> LexicalIndex::find(std::string_view record_id) const {
    if (auto it = id_to_doc_.find(std::string(record_id)); it != id_to_doc_.end()) return it->second;
    return std::nullopt;
}

double LexicalIndex::bm25_field_score(Field f, std::span<const std::string> query_terms,
                                      std::string_view record_id) const {
    const auto doc = find(record_id);
    if (!doc) throw UnknownRecord("unknown record '" + std::string(record_id) + "'");
    const auto& fi = field(f);
    double score = 0.0;
    for (const auto& t : query_terms) {
        const auto id = fi.term_id(t);
        if (!id) continue;
        score += fi.idf(*id) * bm25_tf_part(fi.tf(*id, *doc), fi.doc_length(*doc), fi.avgdl(), params_);
    }
    return score;
}

PreparedQuery LexicalIndex::prepare(const Triad& query, std::size_t max_edits) const {
    PreparedQuery out;
    const auto expanded = expand_query(query, dict_);
    for (auto f : kFields) {
        const auto fi = static_cast<std::size_t>(f);
        const auto& index = fields_[fi];
        const auto originals = tokenize(query.get(f));
        std::unordered_map<std::uint32_t, double> best;
        std::vector<std::uint32_t> order;
        auto add = [&](std::uint32_t id, double w) {
            auto [it, inserted] = best.emplace(id, w);
            if (inserted) {
                order.push_back(id);
            } else {
                it->second = std::max(it->second, w);
            }
        };
        for (const auto& t : expanded[fi]) {
            if (auto id = index.term_id(t)) {
                add(*id, 1.0);
            } else if (max_edits > 0 &&
                       std::find(originals.begin(), originals.end(), t) != originals.end()) {
                const auto cp = to_code_points(t);
                if (cp.size() < 4) continue;
                const auto edits = std::min<std::size_t>(max_edits, cp.size() >= 8 ? 2 : 1);
                for (auto [id, d] : index.fuzzy_neighbours(cp, edits)) add(id, 1.0 / (1.0 + static_cast<double>(d)));
            }
        }
        for (auto id : order) out[fi].terms.push_back({id, best[id]});
    }
    return out;
}

double LexicalIndex::score(Field f, const PreparedField& q, std::size_t doc) const {
    const auto& fi = field(f);
    double s = 0.0;
    for (const auto& t : q.terms) {
        s += t.weight * fi.idf(t.id) * bm25_tf_part(fi.tf(t.id, doc), fi.doc_length(doc), fi.avgdl(), params_);
    }
    return s;
}

void LexicalIndex::accumulate(Field f, const PreparedField& q, std::span<double> scores) const {
    const auto& fi = field(f);
    const double avgdl = fi.avgdl();
    for (const auto& t : q.terms) {
        const double w = t.weight * fi.idf(t.id);
        for (const auto& p : fi.postings(t.id)) {
            scores[p.doc] += w * bm25_tf_part(p.tf, fi.doc_length(p.doc), avgdl, params_);
        }
    }
}

double LexicalIndex::fielded_bm25(const Triad& query, const WeightVector& weights, std::string_view record_id,
                                  std::size_t max_edits) const {
    weights.validate();
    const auto doc = find(record_id);
    if (!doc) throw UnknownRecord("unknown record '" + std::string(record_id) + "'");
    const auto q = prepare(query, max_edits);
    double s = 0.0;
    for (auto f : kFields) {
        const double w = weights.field(f);
        if (w != 0.0) s += w * score(f, q[static_cast<std::size_t>(f)], *doc);
    }
    return s;
}

void LexicalIndex::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FileError("cannot write " + path.string());
    out.write(kMagic, sizeof kMagic);
    binary::put(out, kSnapshotVersion);
    binary::put(out, params_.k1);
    binary::put(out, params_.b);
    std::ostringstream dict_text;
    dict_.write(dict_text);
    binary::put_string(out, dict_text.str());
    std::ostringstream records_csv;
    write_reference_csv(records_csv, records_);
    binary::put_string(out, records_csv.str());
    for (const auto& f : fields_) f.save(out);
    if (!out) throw FileError("failed writing " + path.string());
}

LexicalIndex LexicalIndex::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileError("cannot open " + path.string());
    char magic[sizeof kMagic];
    if (!in.read(magic, sizeof magic) || !std::equal(magic, magic + sizeof magic, kMagic)) {
        throw ParseError(path.string() + " is not a lexical index snapshot");
    }
    const auto version = binary::get<std::uint32_t>(in);
    if (version != kSnapshotVersion) throw ParseError("unsupported snapshot version " + std::to_string(version));
    LexicalIndex idx;
    idx.params_.k1 = binary::get<double>(in);
    idx.params_.b = binary::get<double>(in);
    std::istringstream dict_text(binary::get_string(in));
    idx.dict_ = SynonymDictionary::parse(dict_text);
    std::istringstream records_csv(binary::get_string(in));
    idx.records_ = read_reference_csv(records_csv);
    for (std::size_t i = 0; i < idx.records_.size(); ++i) idx.id_to_doc_.emplace(idx.records_[i].id, i);
    for (auto& f : idx.fields_) {
        f = FieldIndex::load(in);
        if (f.doc_count() != idx.records_.size()) throw ParseError("snapshot field covers a different record set");
    }
    return idx;
}

}  // namespace labharm
