#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "fixtures.hpp"
#include "labharm/error.hpp"
#include "labharm/hybrid_retriever.hpp"
#include "labharm/lexical_index.hpp"
#include "labharm/pair_factory.hpp"
#include "labharm/reranker.hpp"
#include "labharm/rng.hpp"
#include "labharm/synthetic.hpp"
#include "labharm/training.hpp"

using namespace labharm;

namespace {

// Fixed probability per candidate test name.
class TableScorer final : public CompatibilityScorer {
public:
    explicit TableScorer(std::map<std::string, double> p) : p_(std::move(p)) {}
    double score(const PairEncoding& pair) const override {
        const auto it = p_.find(pair.right.test());
        return it == p_.end() ? 0.0 : it->second;
    }
    std::string version() const override { return "table"; }

private:
    std::map<std::string, double> p_;
};

RankedCandidate cand(std::string id, double fused) {
    RankedCandidate c;
    c.record_id = std::move(id);
    c.fused_score = fused;
    return c;
}

std::size_t word_count(const std::string& s) {
    std::istringstream in(s);
    std::size_t n = 0;
    for (std::string w; in >> w;) ++n;
    return n;
}

double smoothed_bce_oracle(double p, double y, double eps) {
    const double t = y * (1 - eps) + 0.5 * eps;
    return -(t * std::log(p) + (1 - t) * std::log(1 - p));
}

}  // namespace

TEST_SUITE("reranker") {
    TEST_CASE("pair encoding layout") {
        const auto e = encode_pair(Triad("hemoglobin", "blood", "g/dl"), Triad("hgb", "blood", "g/dl"));
        CHECK(e.text == "<s> TEST: hemoglobin SAMPLE: blood UNIT: g/dl </s></s> TEST: hgb SAMPLE: blood UNIT: g/dl </s>");
        CHECK_FALSE(e.truncated);
        const auto [l, r] = decode_pair(e.text);
        CHECK(l == Triad("hemoglobin", "blood", "g/dl"));
        CHECK(r == Triad("hgb", "blood", "g/dl"));
    }

    TEST_CASE("empty sample keeps its label") {
        const auto e = encode_pair(Triad("sodium", "", "mmol/l"), Triad("sodium", "serum", "mmol/l"));
        CHECK(e.text.find("SAMPLE:  UNIT:") != std::string::npos);
        const auto [l, r] = decode_pair(e.text);
        CHECK(l.sample().empty());
        CHECK(r.sample() == "serum");
    }

    TEST_CASE("truncation respects the budget and keeps markers") {
        std::string longname;
        for (int i = 0; i < 500; ++i) longname += "tok" + std::to_string(i) + " ";
        const Triad q(longname, "serum", "mg/dl");
        const Triad c("glucose", "serum", "mg/dl");
        const auto e = encode_pair(q, c, 64);
        CHECK(e.truncated);
        CHECK(word_count(e.text) <= 64);
        CHECK(e.text.rfind("<s> TEST: tok0", 0) == 0);
        CHECK(e.text.find(" </s></s> TEST: glucose SAMPLE: serum UNIT: mg/dl </s>") != std::string::npos);
        CHECK(e.right == c);
        CHECK(e.left.sample() == "serum");
        const auto [l, r] = decode_pair(e.text);
        CHECK(l == e.left);
    }

    TEST_CASE("decode rejects malformed text") {
        CHECK_THROWS_AS(decode_pair("TEST: a SAMPLE: b UNIT: c"), ParseError);
        CHECK_THROWS_AS(decode_pair("<s> TEST: a UNIT: c </s></s> TEST: a SAMPLE: b UNIT: c </s>"), ParseError);
    }

    TEST_CASE("features") {
        const FeatureExtractor fx(fixtures::seed_dictionary());
        CHECK(FeatureExtractor::size() == 20);
        CHECK(FeatureExtractor::names().size() == 20);
        const auto same = fx.extract(Triad("glucose", "serum", "mg/dl"), Triad("glucose", "serum", "mg/dl"));
        REQUIRE(same.size() == 20);
        for (double v : same) CHECK(v == doctest::Approx(1.0));
        const auto diff = fx.extract(Triad("glucose", "serum", "mg/dl"), Triad("sodium", "urine", "mmol/l"));
        for (double v : diff) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        CHECK(std::accumulate(diff.begin(), diff.end(), 0.0) < std::accumulate(same.begin(), same.end(), 0.0));
    }

    TEST_CASE("untrained scorer is indifferent") {
        const ReferenceScorer s(fixtures::seed_dictionary());
        CHECK(s.score(Triad("glucose", "serum", "mg/dl"), Triad("sodium", "urine", "mmol/l")) == doctest::Approx(0.5));
    }

    TEST_CASE("model file round trip and validation") {
        LinearModel m;
        for (std::size_t i = 0; i < FeatureExtractor::size(); ++i) m.weights.push_back(0.1 * static_cast<double>(i));
        m.bias = -0.7;
        ReferenceScorer s(fixtures::seed_dictionary(), m);
        s.trained_on = {{"pairs", 12}};
        fixtures::TempDir dir;
        s.save(dir.path() / "m.json");
        const auto back = ReferenceScorer::load(dir.path() / "m.json", fixtures::seed_dictionary());
        CHECK(back.model().weights == m.weights);
        CHECK(back.model().bias == m.bias);
        CHECK(back.trained_on == s.trained_on);
        const Triad a("glucose", "serum", "mg/dl"), b("glu", "ser", "mg/dl");
        CHECK(back.score(a, b) == s.score(a, b));

        auto j = s.to_json();
        j["version"] = "other/9";
        CHECK_THROWS_AS(ReferenceScorer::from_json(j, {}), ParseError);
        j = s.to_json();
        j["weights"].erase(0);
        CHECK_THROWS_AS(ReferenceScorer::from_json(j, {}), ParseError);
        j = s.to_json();
        j["feature_names"][0] = "nope";
        CHECK_THROWS_AS(ReferenceScorer::from_json(j, {}), ParseError);
    }

    TEST_CASE("fusion example") {
        // norm 1, p 0.5, lambda 0.3 gives 0.3 + 0.35
        auto c = cand("A", 1.0);
        c.retrieval_norm = 1.0;
        const TableScorer s({{"x", 0.5}});
        const auto out = rerank(Triad("q", "", ""), {c}, {Triad("x", "", "")}, s, 0.3);
        CHECK(out.front().final_score == doctest::Approx(0.65).epsilon(1e-12));
        CHECK(*out.front().rerank_score == 0.5);
    }

    TEST_CASE("lambda extremes") {
        std::vector<RankedCandidate> cs{cand("A", 3.0), cand("B", 2.0), cand("C", 2.0), cand("D", 1.0)};
        cs = normalize_candidate_scores(cs);
        const std::vector<Triad> ts{Triad("a", "", ""), Triad("b", "", ""), Triad("c", "", ""), Triad("d", "", "")};
        const TableScorer s({{"a", 0.1}, {"b", 0.4}, {"c", 0.9}, {"d", 0.6}});
        const Triad q("q", "", "");
        std::vector<std::string> ids;
        for (const auto& c : rerank(q, cs, ts, s, 1.0)) ids.push_back(c.record_id);
        CHECK(ids == std::vector<std::string>{"A", "B", "C", "D"});
        ids.clear();
        for (const auto& c : rerank(q, cs, ts, s, 0.0)) ids.push_back(c.record_id);
        CHECK(ids == std::vector<std::string>{"C", "D", "B", "A"});
        const auto r = rerank(q, cs, ts, s, 0.5);
        for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i].rank == static_cast<int>(i + 1));
        CHECK_THROWS_AS(rerank(q, {}, {}, s, 0.3), EmptyCandidateList);
        CHECK_THROWS_AS(rerank(q, cs, ts, s, 1.5), InvalidArgument);
    }

    TEST_CASE("top-1 override") {
        auto with_p = [](std::string id, double p) {
            auto c = cand(std::move(id), 0.0);
            c.rerank_score = p;
            return c;
        };
        SUBCASE("scorer agrees") {
            const std::vector<RankedCandidate> o{with_p("A", 0.9), with_p("B", 0.2)};
            const auto out = override_top1(o, o);
            CHECK(out.tag == TagStatus::Pending);
            CHECK_FALSE(out.override_fired);
            CHECK(out.ranking.front().record_id == "A");
        }
        SUBCASE("scorer promotes") {
            const std::vector<RankedCandidate> o{with_p("A", 0.3), with_p("B", 0.2), with_p("C", 0.95)};
            const auto out = override_top1(o, o);
            CHECK(out.tag == TagStatus::Reranked);
            CHECK(out.override_fired);
            std::vector<std::string> ids;
            for (const auto& c : out.ranking) ids.push_back(c.record_id);
            CHECK(ids == std::vector<std::string>{"C", "A", "B"});
            CHECK(out.ranking[2].rank == 3);
        }
        SUBCASE("equal probability keeps retrieval top") {
            const std::vector<RankedCandidate> o{with_p("A", 0.7), with_p("B", 0.7)};
            CHECK(override_top1(o, o).tag == TagStatus::Pending);
        }
        SUBCASE("single candidate") {
            const std::vector<RankedCandidate> o{with_p("A", 0.1)};
            CHECK(override_top1(o, o).tag == TagStatus::Pending);
        }
    }

    TEST_CASE("post-retrieval stage") {
        const auto records = fixtures::lab_records();
        const auto lex = LexicalIndex::build(records, {});
        std::vector<RankedCandidate> retrieved{cand("R01", 5.0), cand("R02", 4.0), cand("R07", 1.0)};
        for (auto& c : retrieved) c.doc = *lex.find(c.record_id);
        const Triad q("glucose", "urine", "mg/dl");
        const TableScorer prefers_second({{"glucose", 0.5}, {"creatinine", 0.0}});
        // R01 and R02 share the test name, so p ties and retrieval order stands.
        auto out = apply_reranker(q, retrieved, lex, prefers_second, {});
        CHECK(out.tag == TagStatus::Pending);
        CHECK(out.ranking.front().record_id == "R01");

        const TableScorer creat({{"glucose", 0.1}, {"creatinine", 0.99}});
        out = apply_reranker(q, retrieved, lex, creat, {});
        CHECK(out.tag == TagStatus::Reranked);
        CHECK(out.ranking.front().record_id == "R07");

        RerankOptions off;
        off.fuse = false;
        off.override_top1 = false;
        out = apply_reranker(q, retrieved, lex, creat, off);
        CHECK(out.tag == TagStatus::Pending);
        CHECK(out.ranking.front().record_id == "R01");
        CHECK(out.ranking.front().retrieval_norm == 1.0);

        CHECK(apply_reranker(q, {}, lex, creat, {}).tag == TagStatus::Missing);
    }

    TEST_CASE("stdio scoring protocol") {
        const TableScorer s({{"hgb", 0.8}});
        std::istringstream in(score_request("p1", Triad("hemoglobin", "blood", "g/dl"), Triad("hgb", "blood", "g/dl")).dump() +
                              "\n\n" + score_request("p2", Triad("a", "", ""), Triad("b", "", "")).dump() + "\n");
        std::ostringstream out;
        serve_score_lines(s, in, out);
        std::istringstream lines(out.str());
        std::string l1, l2;
        std::getline(lines, l1);
        std::getline(lines, l2);
        CHECK(nlohmann::json::parse(l1) == nlohmann::json{{"pair_id", "p1"}, {"p", 0.8}});
        CHECK(nlohmann::json::parse(l2) == nlohmann::json{{"pair_id", "p2"}, {"p", 0.0}});
    }

    TEST_CASE("http scorer") {
        const TableScorer s({{"hgb", 0.8}, {"b", 0.25}});
        httplib::Server srv;
        srv.Post("/score", [&](const httplib::Request& req, httplib::Response& res) {
            std::istringstream in(req.body);
            std::ostringstream out;
            serve_score_lines(s, in, out);
            res.set_content(out.str(), "application/x-ndjson");
        });
        const int port = srv.bind_to_any_port("127.0.0.1");
        std::thread t([&] { srv.listen_after_bind(); });
        srv.wait_until_ready();
        const HttpScorer remote("127.0.0.1", port);
        const std::vector<PairEncoding> pairs{encode_pair(Triad("hemoglobin", "", ""), Triad("hgb", "", "")),
                                              encode_pair(Triad("a", "", ""), Triad("b", "", "")),
                                              encode_pair(Triad("a", "", ""), Triad("zzz", "", ""))};
        CHECK(remote.score_batch(pairs) == std::vector<double>{0.8, 0.25, 0.0});
        CHECK(remote.score(pairs[0]) == 0.8);
        srv.stop();
        t.join();
        CHECK_THROWS(remote.score(pairs[0]));
    }
}

TEST_SUITE("training") {
    TEST_CASE("bce examples") {
        const std::vector<double> half{0.5}, one{1.0}, zero{0.0};
        CHECK(bce_loss(half, one, 0.0) == doctest::Approx(std::log(2.0)));
        CHECK(bce_loss(half, zero, 0.0) == doctest::Approx(std::log(2.0)));
        // eps 0.1 turns target 1 into 0.95
        const std::vector<double> p95{0.95};
        CHECK(bce_loss(p95, one, 0.1) ==
              doctest::Approx(-(0.95 * std::log(0.95) + 0.05 * std::log(0.05))).epsilon(1e-12));
        const std::vector<double> z0{0.0};
        CHECK(bce_with_logits(z0, one, 0.0) == doctest::Approx(std::log(2.0)));
        CHECK_THROWS_AS(bce_loss(half, std::vector<double>{1.0, 0.0}, 0.0), LengthMismatch);
        CHECK_THROWS_AS(bce_loss(one, one, 0.0), InvalidArgument);
    }

    TEST_CASE("bce from logits matches the probability form") {
        Rng rng(5);
        for (int i = 0; i < 200; ++i) {
            const double z = rng.uniform(-12, 12), y = rng.bernoulli(0.5) ? 1.0 : 0.0, eps = rng.uniform(0, 0.2);
            const std::vector<double> zs{z}, ys{y};
            CHECK(bce_with_logits(zs, ys, eps) == doctest::Approx(smoothed_bce_oracle(sigmoid(z), y, eps)).epsilon(1e-9));
        }
        const std::vector<double> big{800.0}, y0{0.0};
        CHECK(bce_with_logits(big, y0, 0.0) == doctest::Approx(800.0));
    }

    TEST_CASE("learning rate schedule") {
        CHECK(learning_rate(0, 100, 10, 1e-2) == 0.0);
        CHECK(learning_rate(5, 100, 10, 1e-2) == doctest::Approx(5e-3));
        CHECK(learning_rate(10, 100, 10, 1e-2) == doctest::Approx(1e-2));
        CHECK(learning_rate(55, 100, 10, 1e-2) == doctest::Approx(5e-3));
        CHECK(learning_rate(100, 100, 10, 1e-2) == 0.0);
    }

    TEST_CASE("gradient clipping") {
        std::vector<double> g{3.0, 4.0};
        CHECK(clip_gradient(g, 1.0) == doctest::Approx(5.0));
        CHECK(g[0] == doctest::Approx(0.6));
        CHECK(g[1] == doctest::Approx(0.8));
        std::vector<double> small{0.3, 0.4};
        clip_gradient(small, 1.0);
        CHECK(small == std::vector<double>{0.3, 0.4});
    }

    TEST_CASE("analytic gradient matches central differences") {
        Rng rng(17);
        const std::size_t d = FeatureExtractor::size();
        for (int batch = 0; batch < 10; ++batch) {
            LinearModel m;
            for (std::size_t j = 0; j < d; ++j) m.weights.push_back(rng.normal());
            m.bias = rng.normal();
            std::vector<std::vector<double>> x(16, std::vector<double>(d));
            std::vector<double> y(16);
            for (std::size_t i = 0; i < x.size(); ++i) {
                for (double& v : x[i]) v = rng.uniform(0, 1);
                y[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
            }
            const double eps = 0.1;
            const auto lg = loss_and_gradient(m, x, y, eps);
            REQUIRE(lg.gradient.size() == d + 1);
            auto loss_at = [&](const LinearModel& mm) {
                std::vector<double> z;
                for (const auto& row : x) z.push_back(mm.logit(row));
                return bce_with_logits(z, y, eps);
            };
            CHECK(lg.loss == doctest::Approx(loss_at(m)).epsilon(1e-12));
            for (std::size_t j = 0; j <= d; ++j) {
                const double h = 1e-5;
                LinearModel up = m, down = m;
                (j < d ? up.weights[j] : up.bias) += h;
                (j < d ? down.weights[j] : down.bias) -= h;
                const double fd = (loss_at(up) - loss_at(down)) / (2 * h);
                CHECK(std::abs(fd - lg.gradient[j]) <= 1e-5 * std::max(1.0, std::abs(fd)));
            }
        }
    }

    TEST_CASE("classification counts") {
        const std::vector<double> p{0.9, 0.8, 0.3, 0.6, 0.1}, y{1, 0, 1, 1, 0};
        const auto c = classify(p, y);
        CHECK(c.tp == 2);
        CHECK(c.fp == 1);
        CHECK(c.fn == 1);
        CHECK(c.tn == 1);
        CHECK(c.f1() == doctest::Approx(2.0 / 3.0));
        CHECK(c.accuracy() == doctest::Approx(0.6));
    }

    TEST_CASE("config validation") {
        TrainConfig c;
        CHECK_NOTHROW(c.validate());
        c.label_smoothing = 0.5;
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
        c = {};
        c.validation_fraction = 1.0;
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
        c = {};
        c.batch_size = 0;
        CHECK_THROWS_AS(c.validate(), InvalidArgument);
        CHECK_THROWS_AS(train(ReferenceScorer({}), {}, TrainConfig{}), EmptyDataset);
    }

    TEST_CASE("trained scorer separates positives from full corruptions") {
        const auto bench = load_benchmark(LABHARM_DATA_DIR "/benchmark");
        std::vector<Triad> pool;
        for (const auto& r : bench.records) pool.push_back(r.triad);
        const PairFactory pf(pool, bench.dictionary);
        GenerationSchedule s;
        s.total = 6000;
        const auto pairs = pf.generate(s, 11);
        TrainConfig cfg;
        cfg.epochs = 2;
        const auto [scorer, report] = train(ReferenceScorer(bench.dictionary), pairs, cfg);
        CHECK(report.train_pairs + report.validation_pairs == pairs.size());
        CHECK(report.warmup_steps == static_cast<std::size_t>(std::floor(0.1 * static_cast<double>(report.total_steps))));
        CHECK(report.max_grad_norm_after_clip <= 1.0 + 1e-12);
        CHECK_FALSE(report.loss_curve.empty());
        for (double w : scorer.model().weights) CHECK(w >= 0.0);

        s.total = 2000;
        const auto held = pf.generate(s, 12);
        CHECK(evaluate_pairs(scorer, held).f1() >= 0.9);
        double pos = 0, n3 = 0;
        std::size_t npos = 0, nn3 = 0;
        for (const auto& p : held) {
            const double v = scorer.score(p.left, p.right);
            if (p.corruption == CorruptionClass::POS) pos += v, ++npos;
            if (p.corruption == CorruptionClass::N3) n3 += v, ++nn3;
        }
        CHECK(pos / static_cast<double>(npos) - n3 / static_cast<double>(nn3) >= 0.3);
    }
}
