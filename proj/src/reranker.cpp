#include "labharm/reranker.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <httplib.h>

#include "labharm/error.hpp"
#include "labharm/fuzzy.hpp"
#include "labharm/text.hpp"

namespace labharm {

// ---------------------------------------------------------------- encoding

namespace {

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    for (auto& w : split(s, ' ')) {
        if (!w.empty()) out.push_back(std::move(w));
    }
    return out;
}

std::string join(const std::vector<std::string>& ws) {
    std::string out;
    for (std::size_t i = 0; i < ws.size(); ++i) {
        if (i) out += ' ';
        out += ws[i];
    }
    return out;
}

std::string triad_segment(const std::string& test, const std::string& sample, const std::string& unit) {
    return "TEST: " + test + " SAMPLE: " + sample + " UNIT: " + unit;
}

}  // namespace

PairEncoding encode_pair(const Triad& query, const Triad& candidate, std::size_t token_budget) {
    constexpr std::size_t kFixedTokens = 9;  // <s> </s></s> </s> + 2 x (TEST: SAMPLE: UNIT:)
    std::array<std::vector<std::string>, 6> values;
    for (std::size_t f = 0; f < 3; ++f) {
        values[f] = words(query.get(kFields[f]));
        values[3 + f] = words(candidate.get(kFields[f]));
    }
    std::size_t total = kFixedTokens;
    for (const auto& v : values) total += v.size();

    PairEncoding enc;
    const std::size_t budget = std::max(token_budget, kFixedTokens + 2);
    while (total > budget) {
        std::size_t longest = 0;
        for (std::size_t i = 1; i < values.size(); ++i) {
            if (values[i].size() > values[longest].size()) longest = i;
        }
        // Test names keep at least one token so both triads stay valid.
        if (values[longest].size() <= 1) break;
        values[longest].pop_back();
        --total;
        enc.truncated = true;
    }
    enc.left = Triad(join(values[0]), join(values[1]), join(values[2]));
    enc.right = Triad(join(values[3]), join(values[4]), join(values[5]));
    enc.text = "<s> " + triad_segment(enc.left.test(), enc.left.sample(), enc.left.unit()) + " </s></s> " +
               triad_segment(enc.right.test(), enc.right.sample(), enc.right.unit()) + " </s>";
    return enc;
}

std::pair<Triad, Triad> decode_pair(std::string_view text) {
    constexpr std::string_view kOpen = "<s> ", kSep = " </s></s> ", kClose = " </s>";
    if (!text.starts_with(kOpen) || !text.ends_with(kClose)) throw ParseError("pair encoding lacks <s> ... </s>");
    const auto body = text.substr(kOpen.size(), text.size() - kOpen.size() - kClose.size());
    const auto sep = body.find(kSep);
    if (sep == std::string_view::npos) throw ParseError("pair encoding lacks </s></s> separator");
    auto parse = [](std::string_view seg) {
        const auto s = seg.find(" SAMPLE: ");
        const auto u = seg.find(" UNIT: ", s == std::string_view::npos ? 0 : s);
        if (!seg.starts_with("TEST: ") || s == std::string_view::npos || u == std::string_view::npos) {
            throw ParseError("triad segment missing TEST:/SAMPLE:/UNIT: labels");
        }
        return Triad(seg.substr(6, s - 6), seg.substr(s + 9, u - s - 9), seg.substr(u + 7));
    };
    return {parse(body.substr(0, sep)), parse(body.substr(sep + kSep.size()))};
}

std::vector<double> CompatibilityScorer::score_batch(std::span<const PairEncoding> pairs) const {
    std::vector<double> out;
    out.reserve(pairs.size());
    for (const auto& p : pairs) out.push_back(score(p));
    return out;
}

// ---------------------------------------------------------------- features

FeatureExtractor::FeatureExtractor(SynonymDictionary dict, std::size_t embedding_dimension)
    : dict_(std::move(dict)), embedder_(embedding_dimension) {}

const std::vector<std::string>& FeatureExtractor::names() {
    static const std::vector<std::string> kNames = [] {
        std::vector<std::string> n;
        for (auto f : kFields) {
            const std::string p(to_string(f));
            for (const char* s : {"_synonym", "_token_f1", "_edit", "_cosine"}) n.push_back(p + s);
        }
        for (const char* s : {"all_synonym", "synonym_share", "min_token_f1", "mean_token_f1", "min_edit", "mean_edit",
                              "min_cosine", "mean_cosine"}) {
            n.emplace_back(s);
        }
        return n;
    }();
    return kNames;
}

namespace {

double edit_similarity(std::string_view a, std::string_view b) {
    const auto ca = to_code_points(a), cb = to_code_points(b);
    const auto longest = std::max(ca.size(), cb.size());
    if (longest == 0) return 1.0;
    return 1.0 - static_cast<double>(damerau_levenshtein(ca, cb, longest)) / static_cast<double>(longest);
}

// F1 of soft token matches: each token counts its best edit similarity
// against the other side, zeroed below 0.6.
double token_f1(std::string_view a, std::string_view b) {
    const auto ta = split(a, ' '), tb = split(b, ' ');
    if (a.empty() || b.empty()) return a.empty() && b.empty() ? 1.0 : 0.0;
    std::vector<double> best_a(ta.size(), 0.0), best_b(tb.size(), 0.0);
    for (std::size_t i = 0; i < ta.size(); ++i) {
        for (std::size_t j = 0; j < tb.size(); ++j) {
            double s = ta[i] == tb[j] ? 1.0 : edit_similarity(ta[i], tb[j]);
            if (s < 0.6) s = 0.0;
            best_a[i] = std::max(best_a[i], s);
            best_b[j] = std::max(best_b[j], s);
        }
    }
    double recall = 0.0, precision = 0.0;
    for (double v : best_a) recall += v;
    for (double v : best_b) precision += v;
    recall /= static_cast<double>(ta.size());
    precision /= static_cast<double>(tb.size());
    return recall + precision > 0 ? 2.0 * recall * precision / (recall + precision) : 0.0;
}

}  // namespace

std::vector<double> FeatureExtractor::extract(const Triad& left, const Triad& right) const {
    // Similarities take the best pair of surface forms from the two synonym
    // groups, so a synonym swap never looks like a mismatch.
    std::vector<double> x;
    x.reserve(size());
    double syn_count = 0.0, min_f1 = 1.0, sum_f1 = 0.0, min_edit = 1.0, sum_edit = 0.0, min_cos = 1.0, sum_cos = 0.0;
    for (auto f : kFields) {
        const auto& a = left.get(f);
        const auto& b = right.get(f);
        const bool syn = dict_.equivalent(a, b, f);
        double f1 = 1.0, edit = 1.0, cos = 1.0;
        if (!syn) {
            f1 = edit = cos = 0.0;
            const auto ga = dict_.group_of(a, f), gb = dict_.group_of(b, f);
            for (const auto& x1 : ga) {
                for (const auto& x2 : gb) {
                    f1 = std::max(f1, token_f1(x1, x2));
                    edit = std::max(edit, edit_similarity(x1, x2));
                    if (!x1.empty() && !x2.empty()) {
                        cos = std::max(cos, cosine_similarity(embedding(x1), embedding(x2)));
                    }
                }
            }
        }
        x.insert(x.end(), {syn ? 1.0 : 0.0, f1, edit, cos});
        syn_count += syn ? 1.0 : 0.0;
        min_f1 = std::min(min_f1, f1);
        sum_f1 += f1;
        min_edit = std::min(min_edit, edit);
        sum_edit += edit;
        min_cos = std::min(min_cos, cos);
        sum_cos += cos;
    }
    x.insert(x.end(), {syn_count == 3.0 ? 1.0 : 0.0, syn_count / 3.0, min_f1, sum_f1 / 3.0, min_edit, sum_edit / 3.0,
                       min_cos, sum_cos / 3.0});
    return x;
}

const Embedding& FeatureExtractor::embedding(const std::string& term) const {
    {
        std::shared_lock lock(cache_mutex_);
        if (auto it = cache_.find(term); it != cache_.end()) return it->second;
    }
    auto e = embedder_.embed(term);
    std::unique_lock lock(cache_mutex_);
    return cache_.try_emplace(term, std::move(e)).first->second;
}

// ---------------------------------------------------------------- model

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double LinearModel::logit(std::span<const double> features) const {
    double z = bias;
    for (std::size_t i = 0; i < weights.size() && i < features.size(); ++i) z += weights[i] * features[i];
    return z;
}

double LinearModel::probability(std::span<const double> features) const { return sigmoid(logit(features)); }

ReferenceScorer::ReferenceScorer(SynonymDictionary dict)
    : extractor_(std::move(dict)), model_{std::vector<double>(FeatureExtractor::size(), 0.0), 0.0} {}

ReferenceScorer::ReferenceScorer(SynonymDictionary dict, LinearModel model)
    : extractor_(std::move(dict)), model_(std::move(model)) {
    if (model_.weights.size() != FeatureExtractor::size()) {
        throw InvalidArgument("model has " + std::to_string(model_.weights.size()) + " weights, expected " +
                              std::to_string(FeatureExtractor::size()));
    }
}

double ReferenceScorer::score(const PairEncoding& pair) const { return score(pair.left, pair.right); }

double ReferenceScorer::score(const Triad& left, const Triad& right) const {
    return model_.probability(extractor_.extract(left, right));
}

nlohmann::json ReferenceScorer::to_json() const {
    return {{"version", kFormatVersion}, {"feature_names", FeatureExtractor::names()},
            {"weights", model_.weights},  {"bias", model_.bias},
            {"trained_on", trained_on},   {"metrics", metrics}};
}

ReferenceScorer ReferenceScorer::from_json(const nlohmann::json& j, SynonymDictionary dict) {
    try {
        if (j.at("version").get<std::string>() != kFormatVersion) {
            throw ParseError("unsupported model version '" + j.at("version").get<std::string>() + "'");
        }
        if (j.at("feature_names").get<std::vector<std::string>>() != FeatureExtractor::names()) {
            throw ParseError("model feature names do not match this build");
        }
        LinearModel m{j.at("weights").get<std::vector<double>>(), j.at("bias").get<double>()};
        if (m.weights.size() != FeatureExtractor::size()) throw ParseError("model weight count does not match features");
        for (double w : m.weights) {
            if (!std::isfinite(w)) throw ParseError("model weights must be finite");
        }
        ReferenceScorer s(std::move(dict), std::move(m));
        s.trained_on = j.value("trained_on", nlohmann::json::object());
        s.metrics = j.value("metrics", nlohmann::json::object());
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("model file: ") + e.what());
    }
}

void ReferenceScorer::save(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw FileError("cannot write " + path.string());
    out << to_json().dump(2) << '\n';
}

ReferenceScorer ReferenceScorer::load(const std::filesystem::path& path, SynonymDictionary dict) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return from_json(j, std::move(dict));
}

// ---------------------------------------------------------------- external scorer

namespace {

nlohmann::json triad_json(const Triad& t) {
    return {{"test", t.test()}, {"sample", t.sample()}, {"unit", t.unit()}};
}

}  // namespace

nlohmann::json score_request(std::string_view pair_id, const Triad& left, const Triad& right) {
    return {{"pair_id", pair_id}, {"left", triad_json(left)}, {"right", triad_json(right)}};
}

void serve_score_lines(const CompatibilityScorer& scorer, std::istream& in, std::ostream& out) {
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        const auto req = nlohmann::json::parse(line);
        const auto& l = req.at("left");
        const auto& r = req.at("right");
        const auto enc = encode_pair(Triad(l.at("test").get<std::string>(), l.value("sample", ""), l.value("unit", "")),
                                     Triad(r.at("test").get<std::string>(), r.value("sample", ""), r.value("unit", "")));
        out << nlohmann::json{{"pair_id", req.at("pair_id")}, {"p", scorer.score(enc)}}.dump() << '\n';
    }
    out.flush();
}

HttpScorer::HttpScorer(std::string host, int port, std::string version)
    : host_(std::move(host)), port_(port), version_(std::move(version)) {}

double HttpScorer::score(const PairEncoding& pair) const { return score_batch(std::span(&pair, 1)).front(); }

std::vector<double> HttpScorer::score_batch(std::span<const PairEncoding> pairs) const {
    std::string body;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        body += score_request(std::to_string(i), pairs[i].left, pairs[i].right).dump();
        body += '\n';
    }
    httplib::Client client(host_, port_);
    auto res = client.Post("/score", body, "application/x-ndjson");
    if (!res || res->status != 200) {
        throw Error("external scorer at " + host_ + ":" + std::to_string(port_) + " failed" +
                    (res ? " with status " + std::to_string(res->status) : std::string()));
    }
    std::vector<double> out(pairs.size(), std::nan(""));
    std::istringstream lines(res->body);
    std::string line;
    while (std::getline(lines, line)) {
        if (trim(line).empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const auto id = std::stoul(j.at("pair_id").get<std::string>());
        const double p = j.at("p").get<double>();
        if (id >= out.size() || !(p >= 0.0 && p <= 1.0)) throw ParseError("external scorer returned a bad response");
        out[id] = p;
    }
    for (double p : out) {
        if (std::isnan(p)) throw ParseError("external scorer response is missing pairs");
    }
    return out;
}

// ---------------------------------------------------------------- rerank

namespace {

void renumber(std::vector<RankedCandidate>& cs) {
    for (std::size_t i = 0; i < cs.size(); ++i) cs[i].rank = static_cast<int>(i + 1);
}

}  // namespace

std::vector<RankedCandidate> rerank(const Triad& query, std::vector<RankedCandidate> candidates,
                                    const std::vector<Triad>& candidate_triads, const CompatibilityScorer& scorer,
                                    double lambda) {
    if (candidates.empty()) throw EmptyCandidateList("rerank of an empty candidate list");
    if (candidate_triads.size() != candidates.size()) throw LengthMismatch("one triad per candidate required");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw InvalidArgument("lambda must be in [0,1]");
    std::vector<PairEncoding> encodings;
    encodings.reserve(candidates.size());
    for (const auto& t : candidate_triads) encodings.push_back(encode_pair(query, t));
    const auto p = scorer.score_batch(encodings);
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        candidates[i].rerank_score = p[i];
        candidates[i].final_score = lambda * candidates[i].retrieval_norm + (1.0 - lambda) * p[i];
    }
    // Input is in retrieval order (fused desc, id asc), so a stable sort
    // breaks ties the same way.
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const RankedCandidate& a, const RankedCandidate& b) { return a.final_score > b.final_score; });
    renumber(candidates);
    return candidates;
}

OverrideOutcome override_top1(const std::vector<RankedCandidate>& original,
                              const std::vector<RankedCandidate>& reranked) {
    OverrideOutcome out{original, TagStatus::Pending};
    if (original.size() < 2 || reranked.empty()) return out;
    const auto best = std::max_element(reranked.begin(), reranked.end(), [](const auto& a, const auto& b) {
        return a.rerank_score.value_or(0.0) < b.rerank_score.value_or(0.0);
    });
    const auto& top = original.front();
    if (best->record_id == top.record_id) return out;
    if (!(best->rerank_score.value_or(0.0) > top.rerank_score.value_or(0.0))) return out;
    const auto it = std::find_if(out.ranking.begin(), out.ranking.end(),
                                 [&](const RankedCandidate& c) { return c.record_id == best->record_id; });
    if (it == out.ranking.end()) throw InvalidArgument("override lists cover different candidates");
    std::rotate(out.ranking.begin(), it, it + 1);
    renumber(out.ranking);
    out.tag = TagStatus::Reranked;
    out.override_fired = true;
    return out;
}

OverrideOutcome apply_reranker(const Triad& query, const std::vector<RankedCandidate>& retrieved,
                               const LexicalIndex& index, const CompatibilityScorer& scorer,
                               const RerankOptions& options) {
    if (retrieved.empty()) return {{}, TagStatus::Missing};
    auto normalized = normalize_candidate_scores(retrieved);
    if (!options.fuse && !options.override_top1) return {normalized, TagStatus::Pending};

    std::vector<Triad> triads;
    triads.reserve(normalized.size());
    for (const auto& c : normalized) triads.push_back(index.record(c.doc).triad);

    std::vector<RankedCandidate> fused;
    if (options.fuse) {
        fused = rerank(query, normalized, triads, scorer, options.lambda);
    } else {
        // lambda = 1 annotates scores and keeps retrieval order exactly.
        fused = rerank(query, normalized, triads, scorer, 1.0);
    }
    OverrideOutcome out{fused, TagStatus::Pending};
    out.fusion_changed_top = fused.front().record_id != normalized.front().record_id;
    if (options.override_top1) {
        auto o = override_top1(fused, fused);
        out.ranking = std::move(o.ranking);
        out.override_fired = o.override_fired;
    }
    if (out.ranking.front().record_id != normalized.front().record_id) out.tag = TagStatus::Reranked;
    return out;
}

}  // namespace labharm
