#include "labharm/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "labharm/ablation.hpp"
#include "labharm/csv.hpp"
#include "labharm/error.hpp"
#include "labharm/parallel.hpp"
#include "labharm/text.hpp"

namespace labharm {

// ---------------------------------------------------------------- config

namespace {

std::filesystem::path resolve(const ConfigFile& f, const std::string& key) {
    const auto v = f.get(key);
    if (!v || v->empty()) return {};
    std::filesystem::path p(*v);
    if (p.is_relative() && !f.base_dir().empty()) p = f.base_dir() / p;
    return p;
}

void require_file(const std::filesystem::path& p, const char* what) {
    if (!p.empty() && !std::filesystem::exists(p)) throw FileError(std::string(what) + " not found: " + p.string());
}

}  // namespace

void PipelineConfig::validate() const {
    if (reference_csv.empty()) throw InvalidArgument("reference CSV path is required");
    require_file(reference_csv, "reference CSV");
    require_file(synonyms, "synonym file");
    require_file(vectors, "vectors file");
    require_file(model, "model file");
    require_file(weights, "weights file");
    if (tune_on_startup) {
        if (validation_queries.empty() || validation_gold.empty()) {
            throw InvalidArgument("tune_on_startup needs validation queries and gold");
        }
        require_file(validation_queries, "validation queries");
        require_file(validation_gold, "validation gold");
    }
    if (!(rerank.lambda >= 0.0 && rerank.lambda <= 1.0)) throw InvalidArgument("lambda must be in [0,1]");
    if (port < 0 || port > 65535) throw InvalidArgument("port out of range");
    if (embedding_dimension == 0) throw InvalidArgument("embedding dimension must be positive");
    inline_weights.validate();
    retrieval.validate();
}

PipelineConfig PipelineConfig::from(const ConfigFile& f) {
    PipelineConfig c;
    c.reference_csv = resolve(f, "paths.reference");
    c.synonyms = resolve(f, "paths.synonyms");
    c.vectors = resolve(f, "paths.vectors");
    c.model = resolve(f, "paths.model");
    c.weights = resolve(f, "paths.weights");
    if (auto r = resolve(f, "paths.results"); !r.empty()) c.results = r;
    if (auto r = resolve(f, "paths.feedback"); !r.empty()) c.feedback_log = r;
    c.ui_dir = resolve(f, "paths.ui");
    c.validation_queries = resolve(f, "tuning.validation_queries");
    c.validation_gold = resolve(f, "tuning.validation_gold");
    c.tune_on_startup = f.get_bool("tuning.tune_on_startup", false);
    c.tuning_budget = static_cast<std::size_t>(f.get_int("tuning.budget", 120));
    c.embedding_dimension = static_cast<std::size_t>(f.get_int("embedding.dimension", 128));

    auto& w = c.inline_weights;
    w.alpha = f.get_double("weights.alpha", w.alpha);
    w.beta = f.get_double("weights.beta", w.beta);
    w.w_test = f.get_double("weights.w_test", w.w_test);
    w.w_sample = f.get_double("weights.w_sample", w.w_sample);
    w.w_unit = f.get_double("weights.w_unit", w.w_unit);

    c.retrieval.top_k = static_cast<std::size_t>(f.get_int("retrieval.top_k", 10));
    c.retrieval.max_edits = static_cast<std::size_t>(f.get_int("retrieval.max_edits", 1));
    c.retrieval.min_semantic = f.get_double("retrieval.min_semantic", c.retrieval.min_semantic);
    c.rerank.lambda = f.get_double("rerank.lambda", 0.3);
    c.rerank.fuse = f.get_bool("rerank.fuse", true);
    c.rerank.override_top1 = f.get_bool("rerank.override", true);

    c.host = f.get_or("service.host", c.host);
    c.port = static_cast<int>(f.get_int("service.port", c.port));
    c.threads = static_cast<std::size_t>(f.get_int("run.threads", 0));
    c.seed = static_cast<std::uint64_t>(f.get_int("run.seed", 42));
    return c;
}

nlohmann::json weights_json(const WeightVector& w) {
    return {{"alpha", w.alpha}, {"beta", w.beta}, {"w_test", w.w_test}, {"w_sample", w.w_sample}, {"w_unit", w.w_unit}};
}

WeightVector weights_from_json(const nlohmann::json& j) {
    try {
        WeightVector w{j.at("alpha").get<double>(), j.at("beta").get<double>(), j.at("w_test").get<double>(),
                       j.at("w_sample").get<double>(), j.at("w_unit").get<double>()};
        w.validate();
        return w;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("weights: ") + e.what());
    }
}

WeightVector load_weights(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    try {
        auto j = nlohmann::json::parse(in);
        return weights_from_json(j.contains("weights") ? j.at("weights") : j);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

void save_weights(const std::filesystem::path& path, const WeightVector& w) {
    std::ofstream out(path);
    if (!out) throw FileError("cannot write " + path.string());
    out << weights_json(w).dump(2) << '\n';
}

// ---------------------------------------------------------------- runtime

std::unique_ptr<PipelineRuntime> PipelineRuntime::load(const PipelineConfig& cfg) {
    cfg.validate();
    auto rt = std::unique_ptr<PipelineRuntime>(new PipelineRuntime());
    auto records = load_reference_csv(cfg.reference_csv);
    SynonymDictionary base = cfg.synonyms.empty() ? SynonymDictionary{} : SynonymDictionary::load(cfg.synonyms);
    auto dict = base.with_record_synonyms(records);
    rt->lexical_ = LexicalIndex::build(records, dict);
    if (cfg.vectors.empty()) {
        rt->embedder_ = std::make_unique<HashingEmbedder>(cfg.embedding_dimension);
        rt->vectors_ = VectorStore::build(rt->lexical_.records(), *rt->embedder_);
    } else {
        rt->vectors_ = VectorStore::load(cfg.vectors);
        rt->embedder_ = std::make_unique<HashingEmbedder>(rt->vectors_.dimension());
    }
    rt->retriever_ = std::make_unique<HybridRetriever>(rt->lexical_, rt->vectors_, *rt->embedder_);
    if (!cfg.model.empty()) rt->scorer_ = ReferenceScorer::load(cfg.model, rt->lexical_.dictionary());

    rt->retrieval_ = cfg.retrieval;
    rt->rerank_ = cfg.rerank;
    if (!cfg.weights.empty()) {
        rt->retrieval_.weights = load_weights(cfg.weights);
    } else if (cfg.tune_on_startup) {
        const auto queries = load_queries(cfg.validation_queries);
        const auto gold = load_gold(cfg.validation_gold);
        const auto cache = SignalCache::build(*rt->retriever_, queries, cfg.retrieval.max_edits, cfg.threads);
        TunerConfig tc;
        tc.budget = cfg.tuning_budget;
        tc.initial_designs = std::min<std::size_t>(tc.initial_designs, cfg.tuning_budget);
        tc.seed = cfg.seed;
        rt->retrieval_.weights =
            tune_retrieval_weights(*rt->retriever_, cache, gold, tc, cfg.retrieval.min_semantic).best;
    } else {
        rt->retrieval_.weights = cfg.inline_weights;
    }
    rt->retrieval_.validate();
    return rt;
}

Harmonizer PipelineRuntime::harmonizer() const { return Harmonizer(*retriever_, scorer(), retrieval_, rerank_); }

// ---------------------------------------------------------------- preprocess

bool valid_code_hint(std::string_view code) {
    const auto dash = code.find('-');
    if (dash == std::string_view::npos || dash == 0 || dash > 5 || code.size() != dash + 2) return false;
    auto digit = [](char c) { return c >= '0' && c <= '9'; };
    for (std::size_t i = 0; i < dash; ++i) {
        if (!digit(code[i])) return false;
    }
    return digit(code[dash + 1]);
}

namespace {

std::optional<double> parse_number(std::string_view s) {
    const auto t = trim(s);
    double v = 0;
    auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || p != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace

PreprocessResult preprocess(std::span<const RawQueryRow> rows) {
    PreprocessResult out;
    std::map<Triad, std::size_t> by_triad;
    std::unordered_set<std::string> ids;
    for (const auto& r : rows) {
        const std::string id = trim(r.id).empty() ? "q" + std::to_string(r.line) : trim(r.id);
        auto reject = [&](std::string reason) { out.rejects.push_back({r.line, id, std::move(reason)}); };

        if (normalize_text(r.test).empty()) {
            reject("empty test");
            continue;
        }
        const auto code = trim(r.code_hint);
        if (!code.empty() && !valid_code_hint(code)) {
            reject("malformed code_hint");
            continue;
        }
        std::uint64_t freq = 0;
        if (const auto f = trim(r.frequency); !f.empty()) {
            auto [p, ec] = std::from_chars(f.data(), f.data() + f.size(), freq);
            if (ec != std::errc() || p != f.data() + f.size()) {
                reject("invalid frequency");
                continue;
            }
        }
        std::optional<QueryStats> stats;
        const std::array<const std::string*, 4> cells{&r.min, &r.max, &r.mean, &r.std};
        const auto present = std::count_if(cells.begin(), cells.end(), [](auto* c) { return !trim(*c).empty(); });
        if (present != 0 && present != 4) {
            reject("incomplete stats");
            continue;
        }
        if (present == 4) {
            std::array<double, 4> v{};
            bool ok = true;
            for (std::size_t i = 0; i < 4; ++i) {
                const auto n = parse_number(*cells[i]);
                if (!n) ok = false;
                else v[i] = *n;
            }
            if (!ok) {
                reject("invalid stats");
                continue;
            }
            if (std::any_of(v.begin(), v.end(), [](double x) { return x < 0; })) {
                reject("negative stats");
                continue;
            }
            if (!(v[0] <= v[2] && v[2] <= v[1])) {
                reject("inconsistent stats");
                continue;
            }
            stats = QueryStats{v[0], v[1], v[2], v[3]};
        }
        if (!ids.insert(id).second) {
            reject("duplicate id");
            continue;
        }
        QueryRecord q;
        q.id = id;
        q.triad = Triad(r.test, r.sample, r.unit);
        if (!code.empty()) q.code_hint = code;
        q.frequency = freq;
        q.stats = stats;
        if (const auto it = by_triad.find(q.triad); it != by_triad.end()) {
            out.queries[it->second].frequency += freq;
            continue;
        }
        by_triad.emplace(q.triad, out.queries.size());
        out.queries.push_back(std::move(q));
    }
    return out;
}

PreprocessResult preprocess_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    const auto rows = read_query_rows(in);
    return preprocess(rows);
}

void write_rejects(std::ostream& out, std::span<const Reject> rejects) {
    csv::write_row(out, {"line", "id", "reason"});
    for (const auto& r : rejects) csv::write_row(out, {std::to_string(r.line), r.id, r.reason});
}

void write_queries(std::ostream& out, std::span<const QueryRecord> queries) {
    std::vector<RawQueryRow> rows;
    auto num = [](double v) {
        char buf[32];
        auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, p);
    };
    for (const auto& q : queries) {
        RawQueryRow r;
        r.id = q.id;
        r.test = q.triad.test();
        r.sample = q.triad.sample();
        r.unit = q.triad.unit();
        r.code_hint = q.code_hint.value_or("");
        r.frequency = std::to_string(q.frequency);
        if (q.stats) {
            r.min = num(q.stats->min);
            r.max = num(q.stats->max);
            r.mean = num(q.stats->mean);
            r.std = num(q.stats->std);
        }
        rows.push_back(std::move(r));
    }
    write_query_rows(out, rows);
}

std::vector<QueryRecord> load_queries(const std::filesystem::path& path) { return preprocess_file(path).queries; }

// ---------------------------------------------------------------- results

namespace {

nlohmann::json triad_json(const Triad& t) { return {{"test", t.test()}, {"sample", t.sample()}, {"unit", t.unit()}}; }

Triad triad_from(const nlohmann::json& j) {
    return Triad(j.at("test").get<std::string>(), j.value("sample", ""), j.value("unit", ""));
}

}  // namespace

nlohmann::json HarmonizationResult::to_json() const {
    nlohmann::json cands = nlohmann::json::array();
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& c = candidates[i];
        nlohmann::json jc{{"record_id", c.record_id},
                          {"rank", c.rank},
                          {"lexical", c.lexical_score},
                          {"semantic", c.semantic_score},
                          {"fused", c.fused_score},
                          {"retrieval_norm", c.retrieval_norm},
                          {"rerank", c.rerank_score ? nlohmann::json(*c.rerank_score) : nlohmann::json(nullptr)},
                          {"final", c.final_score}};
        if (i < candidate_triads.size()) jc["triad"] = triad_json(candidate_triads[i]);
        cands.push_back(std::move(jc));
    }
    nlohmann::json j{{"query_id", query_id},
                     {"query", triad_json(query)},
                     {"tag", to_string(tag)},
                     {"decided_by", decided_by},
                     {"chosen", chosen ? nlohmann::json(*chosen) : nlohmann::json(nullptr)},
                     {"rule", rule},
                     {"candidates", std::move(cands)}};
    if (error) j["error"] = *error;
    return j;
}

HarmonizationResult HarmonizationResult::from_json(const nlohmann::json& j) {
    try {
        HarmonizationResult r;
        r.query_id = j.at("query_id").get<std::string>();
        r.query = triad_from(j.at("query"));
        r.tag = parse_tag_status(j.at("tag").get<std::string>());
        r.decided_by = j.value("decided_by", "system");
        if (!j.at("chosen").is_null()) r.chosen = j.at("chosen").get<std::string>();
        r.rule = j.value("rule", "none");
        if (j.contains("error")) r.error = j.at("error").get<std::string>();
        for (const auto& jc : j.at("candidates")) {
            RankedCandidate c;
            c.record_id = jc.at("record_id").get<std::string>();
            c.rank = jc.at("rank").get<int>();
            c.lexical_score = jc.at("lexical").get<double>();
            c.semantic_score = jc.at("semantic").get<double>();
            c.fused_score = jc.at("fused").get<double>();
            c.retrieval_norm = jc.at("retrieval_norm").get<double>();
            if (!jc.at("rerank").is_null()) c.rerank_score = jc.at("rerank").get<double>();
            c.final_score = jc.at("final").get<double>();
            r.candidates.push_back(std::move(c));
            r.candidate_triads.push_back(triad_from(jc.at("triad")));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("result record: ") + e.what());
    }
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const auto t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                  tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
    return buf;
}

Harmonizer::Harmonizer(const HybridRetriever& retriever, const CompatibilityScorer* scorer, RetrievalConfig retrieval,
                       RerankOptions rerank)
    : retriever_(&retriever), scorer_(scorer), retrieval_(std::move(retrieval)), rerank_(rerank) {
    retrieval_.validate();
}

HarmonizationResult Harmonizer::harmonize(const QueryRecord& query) const {
    HarmonizationResult r;
    r.query_id = query.id;
    r.query = query.triad;
    try {
        const auto retrieved = retriever_->retrieve(query.triad, retrieval_);
        if (retrieved.empty()) {
            r.tag = TagStatus::Missing;
        } else {
            if (scorer_) {
                auto out = apply_reranker(query.triad, retrieved, retriever_->lexical(), *scorer_, rerank_);
                r.candidates = std::move(out.ranking);
                r.tag = out.tag;
                if (out.tag == TagStatus::Reranked) {
                    r.rule = out.override_fired ? (out.fusion_changed_top ? "fusion+override" : "override") : "fusion";
                }
            } else {
                r.candidates = normalize_candidate_scores(retrieved);
                for (auto& c : r.candidates) c.final_score = c.retrieval_norm;
                r.tag = TagStatus::Pending;
            }
            for (const auto& c : r.candidates) r.candidate_triads.push_back(retriever_->lexical().record(c.doc).triad);
            r.chosen = r.candidates.front().record_id;
            if (r.candidate_triads.front() == query.triad) {
                r.tag = TagStatus::Copy;
                r.rule = "copy";
            }
        }
    } catch (const std::exception& e) {
        r = HarmonizationResult{};
        r.query_id = query.id;
        r.query = query.triad;
        r.tag = TagStatus::Missing;
        r.error = e.what();
    }
    r.timestamp = utc_timestamp();
    return r;
}

std::vector<HarmonizationResult> Harmonizer::harmonize_batch(std::span<const QueryRecord> queries,
                                                             std::size_t threads) const {
    std::vector<HarmonizationResult> out(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) { out[i] = harmonize(queries[i]); });
    return out;
}

std::filesystem::path timestamp_sidecar(const std::filesystem::path& results) {
    auto p = results;
    p += ".timestamps";
    return p;
}

void write_results(const std::filesystem::path& path, std::span<const HarmonizationResult> results) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw FileError("cannot write " + tmp.string());
        for (const auto& r : results) out << r.to_json().dump() << '\n';
        if (!out) throw FileError("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
    std::ofstream ts(timestamp_sidecar(path));
    if (!ts) throw FileError("cannot write " + timestamp_sidecar(path).string());
    for (const auto& r : results) ts << nlohmann::json{{"query_id", r.query_id}, {"timestamp", r.timestamp}}.dump() << '\n';
}

std::vector<HarmonizationResult> read_results(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    std::vector<HarmonizationResult> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(HarmonizationResult::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
    std::ifstream ts(timestamp_sidecar(path));
    if (ts) {
        std::unordered_map<std::string, std::string> stamps;
        while (std::getline(ts, line)) {
            if (trim(line).empty()) continue;
            const auto j = nlohmann::json::parse(line, nullptr, false);
            if (!j.is_discarded()) stamps[j.value("query_id", "")] = j.value("timestamp", "");
        }
        for (auto& r : out) {
            if (auto it = stamps.find(r.query_id); it != stamps.end()) r.timestamp = it->second;
        }
    }
    return out;
}

void write_runs(std::ostream& out, std::span<const HarmonizationResult> results) {
    for (const auto& r : results) {
        std::vector<std::string> ids;
        for (const auto& c : r.candidates) ids.push_back(c.record_id);
        out << nlohmann::json{{"query_id", r.query_id}, {"ranked", ids}}.dump() << '\n';
    }
}

// ---------------------------------------------------------------- feedback

nlohmann::json FeedbackEvent::to_json() const {
    return {{"query_id", query_id},
            {"query", triad_json(query)},
            {"candidate_id", candidate_id ? nlohmann::json(*candidate_id) : nlohmann::json(nullptr)},
            {"candidate", candidate ? triad_json(*candidate) : nlohmann::json(nullptr)},
            {"verdict", verdict},
            {"reviewer", reviewer},
            {"timestamp", timestamp}};
}

FeedbackEvent FeedbackEvent::from_json(const nlohmann::json& j) {
    try {
        FeedbackEvent e;
        e.query_id = j.at("query_id").get<std::string>();
        e.query = triad_from(j.at("query"));
        if (!j.at("candidate_id").is_null()) e.candidate_id = j.at("candidate_id").get<std::string>();
        if (!j.at("candidate").is_null()) e.candidate = triad_from(j.at("candidate"));
        e.verdict = j.at("verdict").get<std::string>();
        if (e.verdict != "accept" && e.verdict != "reject") throw ParseError("unknown verdict '" + e.verdict + "'");
        e.reviewer = j.at("reviewer").get<std::string>();
        e.timestamp = j.value("timestamp", "");
        return e;
    } catch (const nlohmann::json::exception& ex) {
        throw ParseError(std::string("feedback event: ") + ex.what());
    }
}

FeedbackLog::FeedbackLog(std::filesystem::path path) : path_(std::move(path)) {
    if (std::filesystem::exists(path_)) count_ = read(path_).size();
}

void FeedbackLog::append(const FeedbackEvent& e) {
    const auto line = e.to_json().dump() + '\n';
    std::lock_guard lock(mutex_);
    std::ofstream out(path_, std::ios::app);
    if (!out) throw FileError("cannot append to " + path_.string());
    out.write(line.data(), static_cast<std::streamsize>(line.size()));
    out.flush();
    if (!out) throw FileError("append failed: " + path_.string());
    ++count_;
}

std::size_t FeedbackLog::size() const {
    std::lock_guard lock(mutex_);
    return count_;
}

std::vector<FeedbackEvent> FeedbackLog::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    std::vector<FeedbackEvent> out;
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (trim(line).empty()) continue;
        try {
            out.push_back(FeedbackEvent::from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path.string() + " line " + std::to_string(n) + ": " + e.what());
        }
    }
    return out;
}

std::vector<LabeledPair> export_feedback_pairs(std::span<const FeedbackEvent> events) {
    std::vector<LabeledPair> out;
    std::set<std::tuple<Triad, Triad, std::string>> seen;
    for (const auto& e : events) {
        if (!e.candidate) continue;
        if (!seen.emplace(e.query, *e.candidate, e.verdict).second) continue;
        LabeledPair p;
        p.left = e.query;
        p.right = *e.candidate;
        p.label = e.verdict == "accept" ? 1 : 0;
        p.corruption = p.label ? CorruptionClass::POS : CorruptionClass::N1;
        p.difficulty = Difficulty::easy;
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace labharm
