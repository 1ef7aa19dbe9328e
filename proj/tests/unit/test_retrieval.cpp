#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "labharm/embedding.hpp"
#include "labharm/error.hpp"
#include "labharm/hybrid_retriever.hpp"
#include "oracles.hpp"

using namespace labharm;

namespace {

// Exact character n-gram profile (n = 2..4 with boundary marks), no hashing.
std::map<std::u32string, double> ngram_profile(const std::string& text) {
    std::u32string padded = U"\x02" + to_code_points(normalize_text(text)) + U"\x03";
    std::map<std::u32string, double> m;
    for (std::size_t n = 2; n <= 4; ++n) {
        for (std::size_t i = 0; i + n <= padded.size(); ++i) m[padded.substr(i, n)] += 1;
    }
    return m;
}

double profile_cosine(const std::string& a, const std::string& b) {
    const auto pa = ngram_profile(a), pb = ngram_profile(b);
    double dot = 0, na = 0, nb = 0;
    for (const auto& [g, c] : pa) {
        na += c * c;
        if (auto it = pb.find(g); it != pb.end()) dot += c * it->second;
    }
    for (const auto& [g, c] : pb) nb += c * c;
    return dot / std::sqrt(na * nb);
}

struct Stack {
    std::vector<ReferenceRecord> records = fixtures::lab_records();
    SynonymDictionary dict = fixtures::seed_dictionary().with_record_synonyms(records);
    LexicalIndex lex = LexicalIndex::build(records, dict);
    HashingEmbedder emb{128};
    VectorStore store = VectorStore::build(records, emb);
    HybridRetriever ret{lex, store, emb};
};

}  // namespace

TEST_SUITE("semantic-index") {
    TEST_CASE("record_text") {
        CHECK(record_text(Triad("hemoglobin", "blood", "g/dl")) == "TEST: hemoglobin SAMPLE: blood UNIT: g/dl");
        CHECK(record_text(Triad("x", "", "y")) == "TEST: x SAMPLE:  UNIT: y");
        CHECK(record_text(Triad(" Hemoglobin ", "BLOOD", "G/DL")) == "TEST: hemoglobin SAMPLE: blood UNIT: g/dl");
    }
    TEST_CASE("cosine examples") {
        const std::vector<double> a{1, 2, 3}, neg{-1, -2, -3}, x{1, 0}, y{0, 1}, zero{0, 0, 0};
        CHECK(cosine_similarity(a, a) == doctest::Approx(1.0));
        CHECK(cosine_similarity(x, y) == 0.0);
        CHECK(cosine_similarity(a, neg) == doctest::Approx(-1.0));
        CHECK(cosine_similarity(a, zero) == 0.0);
        CHECK_THROWS_AS(cosine_similarity(a, x), DimensionMismatch);
    }
    TEST_CASE("cosine scale invariance") {
        std::mt19937 gen(3);
        std::normal_distribution<double> nd;
        for (int i = 0; i < 200; ++i) {
            std::vector<double> a(16), b(16);
            for (auto& v : a) v = nd(gen);
            for (auto& v : b) v = nd(gen);
            const double c = 0.01 + std::abs(nd(gen)) * 10;
            auto ca = a;
            for (auto& v : ca) v *= c;
            CHECK(std::abs(cosine_similarity(ca, b) - cosine_similarity(a, b)) < 1e-9);
        }
    }
    TEST_CASE("semantic scores clip at zero") {
        VectorStore s;
        const std::vector<double> q{1, 0}, same{1, 0}, ortho{0, 1}, obtuse{-0.4, std::sqrt(1 - 0.16)};
        s.add("same", same);
        s.add("ortho", ortho);
        s.add("obtuse", obtuse);
        const auto m = semantic_scores(s, q);
        CHECK(m.at("same") == doctest::Approx(1.0));
        CHECK(m.at("ortho") == 0.0);
        CHECK(m.at("obtuse") == 0.0);
        const std::vector<double> off{0, 0, 1};
        CHECK_THROWS_AS(s.scores(off), DimensionMismatch);
        for (double v : s.scores(std::vector<double>{0.3, -0.9})) {
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
    TEST_CASE("hashing embedder") {
        const HashingEmbedder e(128);
        const auto a = e.embed("hemoglobin blood");
        CHECK(a == e.embed("hemoglobin blood"));
        double n = 0;
        for (double v : a) n += v * v;
        CHECK(std::abs(std::sqrt(n) - 1.0) < 1e-9);
        CHECK(std::all_of(a.begin(), a.end(), [](double v) { return std::isfinite(v); }));
        const auto empty = e.embed("");
        CHECK(std::all_of(empty.begin(), empty.end(), [](double v) { return v == 0.0; }));
        CHECK(e.fingerprint() != HashingEmbedder(64).fingerprint());
        CHECK_THROWS_AS(HashingEmbedder(0), InvalidArgument);
    }
    TEST_CASE("shared n-grams beat a disjoint alphabet") {
        const std::string base = "hemoglobin", near = "haemoglobin", far = "xyz qvw";
        // Exact profiles fix the expected order; the hashed vectors must agree.
        REQUIRE(profile_cosine(base, near) > 0.6);
        REQUIRE(profile_cosine(base, far) == 0.0);
        const HashingEmbedder e(128);
        const double c_near = cosine_similarity(e.embed(base), e.embed(near));
        const double c_far = cosine_similarity(e.embed(base), e.embed(far));
        CHECK(c_near > c_far);
        CHECK(c_near > 0.5);
    }
    TEST_CASE("store build, file round-trip and alignment") {
        const auto recs = fixtures::lab_records();
        const HashingEmbedder e(32);
        const auto s = VectorStore::build(recs, e);
        CHECK(s.size() == recs.size());
        CHECK(s.dimension() == 32);
        std::ostringstream out;
        s.write(out);
        CHECK(out.str().rfind("dim=32\n", 0) == 0);
        std::istringstream in(out.str());
        const auto back = VectorStore::read(in);
        REQUIRE(back.size() == s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            const auto a = s.vector(i), b = back.vector(*back.find(s.ids()[i]));
            for (std::size_t j = 0; j < a.size(); ++j) CHECK(a[j] == b[j]);
        }
        auto reversed = recs;
        std::reverse(reversed.begin(), reversed.end());
        const auto aligned = s.aligned_to(reversed);
        CHECK(aligned.ids().front() == recs.back().id);
        auto fewer = recs;
        fewer.pop_back();
        CHECK_THROWS_AS(s.aligned_to(fewer), IndexMismatch);
        std::istringstream bad_dim("dim=3\nA\t1,2\n");
        CHECK_THROWS_AS(VectorStore::read(bad_dim), Error);
        std::istringstream bad_num("dim=2\nA\t1,abc\n");
        CHECK_THROWS_AS(VectorStore::read(bad_num), ParseError);
    }
}

TEST_SUITE("hybrid-retriever") {
    TEST_CASE("hand-set signals fuse to a three-way tie broken by id") {
        const std::vector<ReferenceRecord> recs{fixtures::record("c", "x", "", ""), fixtures::record("a", "y", "", ""),
                                                fixtures::record("b", "z", "", "")};
        const auto lex = LexicalIndex::build(recs, {});
        const HashingEmbedder e(8);
        const auto store = VectorStore::build(recs, e);
        const HybridRetriever ret(lex, store, e);
        QuerySignals s;
        s.field_scores = {std::vector<double>{2, 1, 0}, std::vector<double>{0, 0, 0}, std::vector<double>{0, 0, 0}};
        s.semantic = {0, 0.5, 1};
        const auto r = ret.rank(s, {1, 2, 1, 0, 0}, 10, 0.15);
        REQUIRE(r.size() == 3);
        for (const auto& c : r) CHECK(c.fused_score == doctest::Approx(2.0));
        CHECK(r[0].record_id == "a");
        CHECK(r[1].record_id == "b");
        CHECK(r[2].record_id == "c");
        CHECK(r[0].rank == 1);
        CHECK(r[2].rank == 3);
    }

    TEST_CASE("semantic-only records need the eligibility floor") {
        const std::vector<ReferenceRecord> recs{fixtures::record("a", "x", "", ""), fixtures::record("b", "y", "", "")};
        const auto lex = LexicalIndex::build(recs, {});
        const HashingEmbedder e(8);
        const auto store = VectorStore::build(recs, e);
        const HybridRetriever ret(lex, store, e);
        QuerySignals s;
        s.field_scores = {std::vector<double>{0, 0}, std::vector<double>{0, 0}, std::vector<double>{0, 0}};
        s.semantic = {0.1, 0.2};
        const auto r = ret.rank(s, {}, 10, 0.15);
        REQUIRE(r.size() == 1);
        CHECK(r[0].record_id == "b");
    }

    TEST_CASE("candidate invariants and whole-collection rank 1") {
        Stack st;
        const std::vector<Triad> queries{{"hemglobin", "bld", "g/dl"},  {"glucose", "urine", ""},
                                         {"plt count", "blood", "k/ul"}, {"creatinine", "ser", "mg/dl"},
                                         {"wbc", "", ""},               {"albumin level", "plasma", "g/l"}};
        RetrievalConfig cfg;
        cfg.weights = {1.3, 4.0, 1.2, 0.8, 0.5};
        cfg.top_k = 4;
        for (const auto& q : queries) {
            const auto r = st.ret.retrieve(q, cfg);
            REQUIRE(!r.empty());
            CHECK(r.size() <= cfg.top_k);
            const auto qv = st.emb.embed(record_text(q));
            double best = -1;
            std::string best_id;
            for (std::size_t d = 0; d < st.records.size(); ++d) {
                const double lexs = oracle::fielded_bm25(st.records, st.dict, q, cfg.weights, d, 1);
                const double sem = std::max(0.0, cosine_similarity(qv, st.store.vector(*st.store.find(st.records[d].id))));
                const double fused = cfg.weights.alpha * lexs + cfg.weights.beta * sem;
                if (fused > best + 1e-12 || (std::abs(fused - best) <= 1e-12 && st.records[d].id < best_id)) {
                    best = fused;
                    best_id = st.records[d].id;
                }
            }
            CHECK(r[0].record_id == best_id);
            for (std::size_t i = 0; i < r.size(); ++i) {
                CHECK(r[i].rank == static_cast<int>(i + 1));
                CHECK(std::abs(r[i].fused_score - (cfg.weights.alpha * r[i].lexical_score +
                                                   cfg.weights.beta * r[i].semantic_score)) < 1e-9);
                CHECK(r[i].semantic_score >= 0.0);
                CHECK(r[i].semantic_score <= 1.0);
                if (i > 0) {
                    CHECK((r[i - 1].fused_score > r[i].fused_score ||
                           (r[i - 1].fused_score == r[i].fused_score && r[i - 1].record_id < r[i].record_id)));
                }
            }
        }
    }

    TEST_CASE("mode projections") {
        Stack st;
        RetrievalConfig cfg;
        cfg.weights = {2, 3, 1, 1, 1};
        const Triad q("glucose", "serum", "mg/dl");
        auto ids = [](const std::vector<RankedCandidate>& v) {
            std::vector<std::string> out;
            for (const auto& c : v) out.push_back(c.record_id);
            return out;
        };
        auto lex_cfg = cfg;
        lex_cfg.weights.beta = 0;
        auto sem_cfg = cfg;
        sem_cfg.weights.alpha = 0;
        CHECK(ids(st.ret.retrieve(q, cfg, RetrievalMode::lexical)) == ids(st.ret.retrieve(q, lex_cfg)));
        CHECK(ids(st.ret.retrieve(q, cfg, RetrievalMode::semantic)) == ids(st.ret.retrieve(q, sem_cfg)));
        CHECK(ids(st.ret.retrieve(q, cfg, RetrievalMode::hybrid)) == ids(st.ret.retrieve(q, cfg)));

        // beta = 0 orders by fielded BM25; alpha = 0 orders by cosine.
        const auto lexical = st.ret.retrieve(q, lex_cfg);
        for (std::size_t i = 1; i < lexical.size(); ++i) CHECK(lexical[i - 1].lexical_score >= lexical[i].lexical_score);
        const auto semantic = st.ret.retrieve(q, sem_cfg);
        for (std::size_t i = 1; i < semantic.size(); ++i) CHECK(semantic[i - 1].semantic_score >= semantic[i].semantic_score);
        CHECK(parse_retrieval_mode(to_string(RetrievalMode::semantic)) == RetrievalMode::semantic);
    }

    TEST_CASE("batch retrieval is thread-count independent") {
        Stack st;
        std::vector<Triad> qs;
        for (const auto& r : st.records) qs.push_back(Triad(r.triad.test() + "s", r.triad.sample(), ""));
        RetrievalConfig cfg;
        const auto one = st.ret.retrieve_batch(qs, cfg, RetrievalMode::hybrid, 1);
        const auto many = st.ret.retrieve_batch(qs, cfg, RetrievalMode::hybrid, 4);
        REQUIRE(one.size() == many.size());
        for (std::size_t i = 0; i < one.size(); ++i) {
            REQUIRE(one[i].size() == many[i].size());
            for (std::size_t j = 0; j < one[i].size(); ++j) {
                CHECK(one[i][j].record_id == many[i][j].record_id);
                CHECK(one[i][j].fused_score == many[i][j].fused_score);
            }
        }
    }

    TEST_CASE("construction checks and empty index") {
        const auto recs = fixtures::lab_records();
        const auto lex = LexicalIndex::build(recs, {});
        const HashingEmbedder e(16), other(32);
        auto fewer = recs;
        fewer.pop_back();
        CHECK_THROWS_AS(HybridRetriever(lex, VectorStore::build(fewer, e), e), IndexMismatch);
        CHECK_THROWS_AS(HybridRetriever(lex, VectorStore::build(recs, e), other), DimensionMismatch);
        const auto empty_lex = LexicalIndex::build({}, {});
        const HybridRetriever empty(empty_lex, VectorStore{}, e);
        CHECK(empty.retrieve(Triad("glucose", "", ""), {}).empty());
        RetrievalConfig bad;
        bad.top_k = 0;
        CHECK_THROWS_AS(bad.validate(), InvalidArgument);
    }

    TEST_CASE("normalize_candidate_scores") {
        auto make = [](std::vector<double> fused) {
            std::vector<RankedCandidate> v;
            for (double f : fused) {
                RankedCandidate c;
                c.fused_score = f;
                v.push_back(c);
            }
            return normalize_candidate_scores(v);
        };
        const auto a = make({4, 2, 0});
        CHECK(a[0].retrieval_norm == 1.0);
        CHECK(a[1].retrieval_norm == 0.5);
        CHECK(a[2].retrieval_norm == 0.0);
        CHECK(make({7})[0].retrieval_norm == 1.0);
        for (const auto& c : make({3, 3, 3})) CHECK(c.retrieval_norm == 1.0);
        CHECK_THROWS_AS(normalize_candidate_scores({}), EmptyCandidateList);
    }
}
