#include "labharm/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "labharm/error.hpp"
#include "labharm/text.hpp"

namespace labharm {

namespace {

std::uint64_t fnv1a(std::u32string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char32_t c : s) {
        for (int k = 0; k < 4; ++k) {
            h ^= static_cast<std::uint8_t>((c >> (8 * k)) & 0xFF);
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

double norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

}  // namespace

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw DimensionMismatch("cosine of vectors with dimensions " + std::to_string(a.size()) + " and " +
                                std::to_string(b.size()));
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::string record_text(const Triad& t) {
    return "TEST: " + t.test() + " SAMPLE: " + t.sample() + " UNIT: " + t.unit();
}

HashingEmbedder::HashingEmbedder(std::size_t dimension) : dimension_(dimension) {
    if (dimension == 0) throw InvalidArgument("embedding dimension must be positive");
}

Embedding HashingEmbedder::embed(std::string_view text) const {
    Embedding v(dimension_, 0.0);
    const auto normalized = normalize_text(text);

    // Record-template labels mark fields: their n-grams are salted with the
    // field so "serum" as a test name and as a sample land apart, and the
    // labels themselves carry no weight.
    std::vector<std::pair<char32_t, std::string_view>> segments;
    const std::string_view all(normalized);
    const auto sample_at = all.find(" sample:");
    const auto unit_at = all.find(" unit:");
    if (all.starts_with("test:") && sample_at != std::string_view::npos && unit_at != std::string_view::npos &&
        sample_at < unit_at) {
        segments.emplace_back(U'T', all.substr(5, sample_at - 5));
        segments.emplace_back(U'S', all.substr(sample_at + 8, unit_at - sample_at - 8));
        segments.emplace_back(U'U', all.substr(unit_at + 6));
    } else {
        segments.emplace_back(U'*', all);
    }

    for (const auto& [salt, raw] : segments) {
        const auto cps = to_code_points(trim(raw));
        if (cps.empty()) continue;
        std::u32string padded;
        padded.reserve(cps.size() + 2);
        padded.push_back(U'\x02');
        padded += cps;
        padded.push_back(U'\x03');
        std::u32string gram;
        for (std::size_t n = 2; n <= 4; ++n) {
            if (padded.size() < n) break;
            for (std::size_t i = 0; i + n <= padded.size(); ++i) {
                gram.assign(1, salt);
                gram.append(padded, i, n);
                const auto h = fnv1a(gram);
                const auto bucket = static_cast<std::size_t>(h % dimension_);
                v[bucket] += (h >> 63) ? -1.0 : 1.0;
            }
        }
    }
    const double n = norm(v);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
    return v;
}

std::string HashingEmbedder::fingerprint() const { return "hashing-fielded-ngram2-4-fnv1a/d" + std::to_string(dimension_); }

// ---------------------------------------------------------------- VectorStore

void VectorStore::add(std::string id, std::span<const double> v) {
    if (ids_.empty() && dimension_ == 0) dimension_ = v.size();
    if (v.size() != dimension_) {
        throw DimensionMismatch("vector for '" + id + "' has dimension " + std::to_string(v.size()) + ", store has " +
                                std::to_string(dimension_));
    }
    for (double x : v) {
        if (!std::isfinite(x)) throw InvalidArgument("non-finite embedding value for '" + id + "'");
    }
    if (!lookup_.emplace(id, ids_.size()).second) throw DuplicateIdError("duplicate vector id '" + id + "'");
    ids_.push_back(std::move(id));
    data_.insert(data_.end(), v.begin(), v.end());
    norms_.push_back(norm(v));
}

VectorStore VectorStore::build(std::span<const ReferenceRecord> records, const EmbeddingProvider& provider) {
    VectorStore s;
    s.dimension_ = provider.dimension();
    s.fingerprint_ = provider.fingerprint();
    s.ids_.reserve(records.size());
    s.data_.reserve(records.size() * s.dimension_);
    for (const auto& r : records) s.add(r.id, provider.embed(record_text(r.triad)));
    return s;
}

VectorStore VectorStore::read(std::istream& in, std::string fingerprint) {
    VectorStore s;
    s.fingerprint_ = std::move(fingerprint);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("vectors file is empty");
    line = trim(line);
    if (!line.starts_with("dim=")) throw ParseError("vectors file must start with dim=<D>");
    std::size_t dim = 0;
    auto [p, ec] = std::from_chars(line.data() + 4, line.data() + line.size(), dim);
    if (ec != std::errc() || p != line.data() + line.size() || dim == 0) throw ParseError("bad dimension header");
    s.dimension_ = dim;
    std::size_t lineno = 1;
    Embedding v;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("vectors line " + std::to_string(lineno) + ": missing tab");
        v.clear();
        for (const auto& part : split(std::string_view(line).substr(tab + 1), ',')) {
            const auto t = trim(part);
            double x = 0;
            auto [q, e] = std::from_chars(t.data(), t.data() + t.size(), x);
            if (e != std::errc() || q != t.data() + t.size()) {
                throw ParseError("vectors line " + std::to_string(lineno) + ": bad number '" + t + "'");
            }
            v.push_back(x);
        }
        s.add(line.substr(0, tab), v);
    }
    return s;
}

VectorStore VectorStore::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    return read(in, "file:" + path.filename().string());
}

void VectorStore::write(std::ostream& out) const {
    out << "dim=" << dimension_ << '\n';
    char buf[64];
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        out << ids_[i] << '\t';
        const auto v = vector(i);
        for (std::size_t k = 0; k < v.size(); ++k) {
            auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v[k]);
            if (k) out << ',';
            out.write(buf, p - buf);
        }
        out << '\n';
    }
}

std::optional<std::size_t> VectorStore::find(std::string_view id) const {
    if (auto it = lookup_.find(std::string(id)); it != lookup_.end()) return it->second;
    return std::nullopt;
}

std::vector<double> VectorStore::scores(std::span<const double> query) const {
    if (query.size() != dimension_ && !ids_.empty()) {
        throw DimensionMismatch("query dimension " + std::to_string(query.size()) + " != store dimension " +
                                std::to_string(dimension_));
    }
    std::vector<double> out(ids_.size(), 0.0);
    const double qn = norm(query);
    if (qn == 0.0) return out;
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (norms_[i] == 0.0) continue;
        const double* v = data_.data() + i * dimension_;
        double dot = 0.0;
        for (std::size_t k = 0; k < dimension_; ++k) dot += v[k] * query[k];
        out[i] = std::clamp(dot / (norms_[i] * qn), 0.0, 1.0);
    }
    return out;
}

VectorStore VectorStore::aligned_to(std::span<const ReferenceRecord> records) const {
    if (records.size() != ids_.size()) {
        throw IndexMismatch("vector store has " + std::to_string(ids_.size()) + " vectors for " +
                            std::to_string(records.size()) + " records");
    }
    VectorStore s;
    s.dimension_ = dimension_;
    s.fingerprint_ = fingerprint_;
    for (const auto& r : records) {
        const auto i = find(r.id);
        if (!i) throw IndexMismatch("record '" + r.id + "' has no vector");
        s.add(r.id, vector(*i));
    }
    return s;
}

std::unordered_map<std::string, double> semantic_scores(const VectorStore& store, std::span<const double> query) {
    const auto s = store.scores(query);
    std::unordered_map<std::string, double> out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) out.emplace(store.ids()[i], s[i]);
    return out;
}

}  // namespace labharm
