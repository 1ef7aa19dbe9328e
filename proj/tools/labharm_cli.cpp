// labharm: command-line front end for the harmonization pipeline.

#include <chrono>
#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "labharm/ablation.hpp"
#include "labharm/error.hpp"
#include "labharm/pair_factory.hpp"
#include "labharm/pipeline.hpp"
#include "labharm/review_service.hpp"
#include "labharm/synthetic.hpp"
#include "labharm/training.hpp"

using namespace labharm;

namespace {

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 0;
};

// Paths and retrieval knobs shared by several verbs; CLI values override the config file.
struct StackOptions {
    std::string reference, synonyms, vectors, model, weights;
    std::optional<std::size_t> dim, top_k;
    std::optional<double> lambda;
    bool no_rerank = false;

    void add(CLI::App* app, bool with_model) {
        app->add_option("--reference", reference, "Reference CSV");
        app->add_option("--synonyms", synonyms, "Synonym file");
        app->add_option("--vectors", vectors, "Precomputed vectors file");
        app->add_option("--dim", dim, "Fallback embedder dimension");
        app->add_option("--weights", weights, "Weights JSON");
        app->add_option("--top-k", top_k, "Candidates per query");
        if (with_model) {
            app->add_option("--model", model, "Scorer model file");
            app->add_option("--lambda", lambda, "Retrieval share in the reranked score");
            app->add_flag("--no-rerank", no_rerank, "Skip reranking even when a model is configured");
        }
    }
};

PipelineConfig make_config(const Globals& g, const StackOptions& o) {
    PipelineConfig c;
    if (!g.config.empty()) c = PipelineConfig::from(ConfigFile::load(g.config));
    if (!o.reference.empty()) c.reference_csv = o.reference;
    if (!o.synonyms.empty()) c.synonyms = o.synonyms;
    if (!o.vectors.empty()) c.vectors = o.vectors;
    if (!o.model.empty()) c.model = o.model;
    if (!o.weights.empty()) c.weights = o.weights;
    if (o.dim) c.embedding_dimension = *o.dim;
    if (o.top_k) c.retrieval.top_k = *o.top_k;
    if (o.lambda) c.rerank.lambda = *o.lambda;
    if (o.no_rerank) c.model.clear();
    if (g.seed) c.seed = *g.seed;
    if (g.threads) c.threads = g.threads;
    return c;
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FileError("cannot write " + path);
    return out;
}

std::vector<Triad> pool_of(const LexicalIndex& lex) {
    std::vector<Triad> pool;
    for (const auto& r : lex.records()) pool.push_back(r.triad);
    return pool;
}

ReviewServer* g_server = nullptr;
void on_signal(int) {
    if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Laboratory test harmonization: retrieval, reranking, evaluation and review"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "Config file (key = value with [sections])")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Random seed");
    app.add_option("--threads", g.threads, "Worker threads (0 = hardware)");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "Validate and normalize a raw query CSV");
    std::string pre_in, pre_out, pre_rejects = "rejects.csv";
    pre->add_option("input", pre_in, "Raw query CSV")->required()->check(CLI::ExistingFile);
    pre->add_option("-o,--out", pre_out, "Clean query CSV")->required();
    pre->add_option("--rejects", pre_rejects, "Rejects CSV");

    // index
    auto* idx = app.add_subcommand("index", "Build the lexical index snapshot and the vectors file");
    StackOptions idx_opts;
    idx_opts.add(idx, false);
    std::string idx_out, vec_out;
    idx->add_option("--index-out", idx_out, "Binary index snapshot");
    idx->add_option("--vectors-out", vec_out, "Vectors file");

    // tune
    auto* tun = app.add_subcommand("tune", "Tune retrieval weights by validation MRR");
    StackOptions tun_opts;
    tun_opts.add(tun, false);
    std::string tun_queries, tun_gold, tun_out = "weights.json", tun_trace;
    std::size_t tun_budget = 120;
    tun->add_option("--queries", tun_queries, "Validation query CSV")->required()->check(CLI::ExistingFile);
    tun->add_option("--gold", tun_gold, "Validation gold CSV")->required()->check(CLI::ExistingFile);
    tun->add_option("--budget", tun_budget, "Objective evaluations");
    tun->add_option("-o,--out", tun_out, "Weights JSON");
    tun->add_option("--trace", tun_trace, "Trace JSON lines");

    // generate-pairs
    auto* gen = app.add_subcommand("generate-pairs", "Generate labeled training pairs");
    StackOptions gen_opts;
    gen_opts.add(gen, false);
    std::size_t gen_total = 200000, gen_hard_k = 10;
    std::string gen_out;
    gen->add_option("--total", gen_total, "Number of pairs");
    gen->add_option("--hard-k", gen_hard_k, "Mined near-misses per source");
    gen->add_option("-o,--out", gen_out, "Pairs JSON lines")->required();

    // train
    auto* trn = app.add_subcommand("train", "Train the reference scorer");
    std::vector<std::string> trn_pairs;
    std::string trn_synonyms, trn_reference, trn_out = "model.json", trn_report;
    TrainConfig tcfg;
    trn->add_option("--pairs", trn_pairs, "Pairs JSON lines (repeatable)")->required()->check(CLI::ExistingFile);
    trn->add_option("--synonyms", trn_synonyms, "Synonym file");
    trn->add_option("--reference", trn_reference, "Reference CSV whose record synonyms extend the dictionary");
    trn->add_option("--epochs", tcfg.epochs, "Epochs");
    trn->add_option("--batch-size", tcfg.batch_size, "Batch size");
    trn->add_option("--lr", tcfg.lr_max, "Peak learning rate");
    trn->add_option("--label-smoothing", tcfg.label_smoothing, "Label smoothing");
    trn->add_option("--validation-fraction", tcfg.validation_fraction, "Held-out share");
    trn->add_option("-o,--out", trn_out, "Model file");
    trn->add_option("--report", trn_report, "Training report JSON");

    // harmonize
    auto* har = app.add_subcommand("harmonize", "Retrieve, rerank and tag a query set");
    StackOptions har_opts;
    har_opts.add(har, true);
    std::string har_queries, har_out, har_runs;
    har->add_option("--queries", har_queries, "Query CSV")->required()->check(CLI::ExistingFile);
    har->add_option("-o,--out", har_out, "Results JSON lines");
    har->add_option("--runs", har_runs, "Runs file for evaluate");

    // evaluate
    auto* ev = app.add_subcommand("evaluate", "Score runs against gold");
    std::string ev_runs, ev_gold, ev_k = "1,3,5,10", ev_json;
    ev->add_option("--runs", ev_runs, "Runs JSON lines or results file")->required()->check(CLI::ExistingFile);
    ev->add_option("--gold", ev_gold, "Gold CSV")->required()->check(CLI::ExistingFile);
    ev->add_option("--k", ev_k, "Cutoffs, comma separated");
    ev->add_option("--json", ev_json, "Also write the report as JSON");

    // serve
    auto* srv = app.add_subcommand("serve", "Serve the review API over persisted results");
    std::string srv_results, srv_feedback, srv_ui, srv_host;
    std::optional<int> srv_port;
    srv->add_option("--results", srv_results, "Results file");
    srv->add_option("--feedback", srv_feedback, "Feedback log");
    srv->add_option("--ui", srv_ui, "Static UI directory");
    srv->add_option("--host", srv_host, "Bind address");
    srv->add_option("--port", srv_port, "Port (0 picks one)");

    // export-feedback
    auto* exf = app.add_subcommand("export-feedback", "Turn reviewer verdicts into training pairs");
    std::string exf_log, exf_out;
    exf->add_option("--log", exf_log, "Feedback log")->required();
    exf->add_option("-o,--out", exf_out, "Pairs JSON lines")->required();

    // synth
    auto* syn = app.add_subcommand("synth", "Write the synthetic benchmark");
    SyntheticConfig scfg;
    std::string syn_seed_dict = LABHARM_DATA_DIR "/synonyms.txt", syn_out;
    syn->add_option("--seed-synonyms", syn_seed_dict, "Seed synonym file")->check(CLI::ExistingFile);
    syn->add_option("--records", scfg.records, "Reference records");
    syn->add_option("--queries", scfg.queries, "Test queries");
    syn->add_option("--validation-queries", scfg.validation_queries, "Validation queries");
    syn->add_option("-o,--out", syn_out, "Output directory")->required();

    // ablation
    auto* abl = app.add_subcommand("ablation", "Lexical / semantic / hybrid / reranked comparison on a benchmark");
    std::string abl_dir, abl_json;
    std::size_t abl_pairs = 20000, abl_budget = 120;
    double abl_lambda = 0.3;
    abl->add_option("--benchmark", abl_dir, "Benchmark directory")->required()->check(CLI::ExistingDirectory);
    abl->add_option("--pairs", abl_pairs, "Training pairs for the scorer");
    abl->add_option("--budget", abl_budget, "Tuning budget");
    abl->add_option("--lambda", abl_lambda, "Retrieval share in the reranked score");
    abl->add_option("--json", abl_json, "Report JSON");

    // score-server
    auto* ss = app.add_subcommand("score-server", "Serve a scorer over stdin/stdout JSON lines");
    std::string ss_model, ss_synonyms, ss_reference;
    ss->add_option("--model", ss_model, "Model file")->required()->check(CLI::ExistingFile);
    ss->add_option("--synonyms", ss_synonyms, "Synonym file");
    ss->add_option("--reference", ss_reference, "Reference CSV whose record synonyms extend the dictionary");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*pre) {
            const auto r = preprocess_file(pre_in);
            auto out = open_out(pre_out);
            write_queries(out, r.queries);
            auto rej = open_out(pre_rejects);
            write_rejects(rej, r.rejects);
            std::cout << r.queries.size() << " queries, " << r.rejects.size() << " rejected\n";
        } else if (*idx) {
            auto c = make_config(g, idx_opts);
            c.model.clear();
            c.vectors.clear();
            const auto t0 = std::chrono::steady_clock::now();
            const auto rt = PipelineRuntime::load(c);
            const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            if (!idx_out.empty()) rt->lexical().save(idx_out);
            if (!vec_out.empty()) {
                auto out = open_out(vec_out);
                rt->retriever().vectors().write(out);
            }
            std::cout << rt->lexical().size() << " records indexed in " << secs << " s\n";
        } else if (*tun) {
            auto c = make_config(g, tun_opts);
            c.model.clear();
            c.weights.clear();
            const auto rt = PipelineRuntime::load(c);
            const auto queries = load_queries(tun_queries);
            const auto gold = load_gold(tun_gold);
            const auto cache = SignalCache::build(rt->retriever(), queries, c.retrieval.max_edits, c.threads);
            TunerConfig tc;
            tc.budget = tun_budget;
            tc.initial_designs = std::min(tc.initial_designs, tun_budget);
            tc.seed = c.seed;
            const auto res = tune_retrieval_weights(rt->retriever(), cache, gold, tc, c.retrieval.min_semantic);
            save_weights(tun_out, res.best);
            if (!tun_trace.empty()) {
                auto out = open_out(tun_trace);
                write_trace(out, res.trace);
            }
            std::cout << "validation MRR " << res.best_value << "  weights " << weights_json(res.best).dump() << '\n';
        } else if (*gen) {
            auto c = make_config(g, gen_opts);
            c.model.clear();
            const auto rt = PipelineRuntime::load(c);
            PairFactory factory(pool_of(rt->lexical()), rt->dictionary(), &rt->retriever(), gen_hard_k);
            GenerationSchedule sch;
            sch.total = gen_total;
            auto out = open_out(gen_out);
            std::size_t n = 0;
            factory.generate(sch, c.seed, [&](const LabeledPair& p) {
                write_pair_jsonl(out, p);
                ++n;
            }, c.threads);
            std::cout << n << " pairs written\n";
        } else if (*trn) {
            SynonymDictionary dict;
            if (!trn_synonyms.empty()) dict = SynonymDictionary::load(trn_synonyms);
            if (!trn_reference.empty()) dict = dict.with_record_synonyms(load_reference_csv(trn_reference));
            std::vector<LabeledPair> pairs;
            for (const auto& p : trn_pairs) {
                std::ifstream in(p);
                auto more = read_pairs_jsonl(in);
                pairs.insert(pairs.end(), more.begin(), more.end());
            }
            if (g.seed) tcfg.seed = *g.seed;
            auto res = train(ReferenceScorer(dict), pairs, tcfg);
            res.scorer.save(trn_out);
            if (!trn_report.empty()) open_out(trn_report) << res.report.to_json().dump(2) << '\n';
            std::cout << "validation F1 " << res.report.validation.f1() << " (" << res.report.validation_pairs
                      << " pairs)\n";
        } else if (*har) {
            const auto c = make_config(g, har_opts);
            const auto rt = PipelineRuntime::load(c);
            const auto queries = load_queries(har_queries);
            const auto results = rt->harmonizer().harmonize_batch(queries, c.threads);
            write_results(har_out.empty() ? c.results : std::filesystem::path(har_out), results);
            if (!har_runs.empty()) {
                auto out = open_out(har_runs);
                write_runs(out, results);
            }
            std::map<std::string, int> tags;
            for (const auto& r : results) ++tags[std::string(to_string(r.tag))];
            std::cout << results.size() << " queries:";
            for (const auto& [t, n] : tags) std::cout << ' ' << t << '=' << n;
            std::cout << '\n';
        } else if (*ev) {
            const auto runs = load_runs(ev_runs);
            const auto gold = load_gold(ev_gold);
            const auto report = compute_report(runs, gold, parse_cutoffs(ev_k));
            std::cout << format_table({{"run", report}});
            if (!ev_json.empty()) open_out(ev_json) << report.to_json().dump(2) << '\n';
        } else if (*srv) {
            PipelineConfig c;
            if (!g.config.empty()) c = PipelineConfig::from(ConfigFile::load(g.config));
            if (!srv_results.empty()) c.results = srv_results;
            if (!srv_feedback.empty()) c.feedback_log = srv_feedback;
            if (!srv_ui.empty()) c.ui_dir = srv_ui;
            if (!srv_host.empty()) c.host = srv_host;
            if (srv_port) c.port = *srv_port;
            auto service = ReviewService::open(c.results, c.feedback_log);
            ReviewServer server(service, c.ui_dir);
            const int port = server.bind(c.host, c.port);
            g_server = &server;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cout << "listening on http://" << c.host << ':' << port << std::endl;
            server.listen();
        } else if (*exf) {
            const auto events = std::filesystem::exists(exf_log) ? FeedbackLog::read(exf_log) : std::vector<FeedbackEvent>{};
            const auto pairs = export_feedback_pairs(events);
            auto out = open_out(exf_out);
            for (const auto& p : pairs) write_pair_jsonl(out, p);
            std::cout << pairs.size() << " pairs from " << events.size() << " events\n";
        } else if (*syn) {
            if (g.seed) scfg.seed = *g.seed;
            const auto b = make_benchmark(SynonymDictionary::load(syn_seed_dict), scfg);
            write_benchmark(b, syn_out);
            std::cout << b.records.size() << " records, " << b.queries.size() << " queries, "
                      << b.validation_queries.size() << " validation queries\n";
        } else if (*abl) {
            const std::uint64_t seed = g.seed.value_or(42);
            const auto b = load_benchmark(abl_dir);
            const auto lex = LexicalIndex::build(b.records, b.dictionary);
            const HashingEmbedder emb;
            const auto store = VectorStore::build(b.records, emb);
            const HybridRetriever ret(lex, store, emb);
            const auto vq = benchmark_queries(b.validation_queries);
            const auto tq = benchmark_queries(b.queries);
            const RetrievalConfig rc;
            const auto vcache = SignalCache::build(ret, vq, rc.max_edits, g.threads);
            const auto tcache = SignalCache::build(ret, tq, rc.max_edits, g.threads);
            TunerConfig tc;
            tc.budget = abl_budget;
            tc.initial_designs = std::min(tc.initial_designs, abl_budget);
            tc.seed = seed;
            const auto tuned = tune_retrieval_weights(ret, vcache, b.validation_gold, tc, rc.min_semantic);
            PairFactory factory(pool_of(lex), b.dictionary, &ret);
            GenerationSchedule sch;
            sch.total = abl_pairs;
            const auto pairs = factory.generate(sch, seed, g.threads);
            TrainConfig trc;
            trc.seed = seed;
            const auto trained = train(ReferenceScorer(b.dictionary), pairs, trc);
            AblationConfig acfg;
            acfg.weights = tuned.best;
            acfg.rerank.lambda = abl_lambda;
            acfg.threads = g.threads;
            const std::vector<AblationMode> modes{AblationMode::lexical, AblationMode::semantic, AblationMode::hybrid,
                                                  AblationMode::hybrid_rerank};
            const auto rows = run_ablation(ret, tcache, b.gold, modes, acfg, &trained.scorer);
            std::cout << "tuned weights " << weights_json(tuned.best).dump() << " (validation MRR "
                      << tuned.best_value << ")\n"
                      << "scorer validation F1 " << trained.report.validation.f1() << "\n\n"
                      << format_ablation(rows);
            if (!abl_json.empty()) open_out(abl_json) << ablation_json(rows, tuned.best, abl_lambda).dump(2) << '\n';
        } else if (*ss) {
            SynonymDictionary dict;
            if (!ss_synonyms.empty()) dict = SynonymDictionary::load(ss_synonyms);
            if (!ss_reference.empty()) dict = dict.with_record_synonyms(load_reference_csv(ss_reference));
            const auto scorer = ReferenceScorer::load(ss_model, dict);
            std::ios::sync_with_stdio(false);
            serve_score_lines(scorer, std::cin, std::cout);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
