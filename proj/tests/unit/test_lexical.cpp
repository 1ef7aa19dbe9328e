#include <doctest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "labharm/error.hpp"
#include "labharm/fuzzy.hpp"
#include "labharm/lexical_index.hpp"
#include "oracles.hpp"

using namespace labharm;

namespace {

std::vector<ReferenceRecord> two_records() {
    return {fixtures::record("A", "glucose serum", "", ""), fixtures::record("B", "glucose urine", "", "")};
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST_SUITE("build_index") {
    TEST_CASE("document counts") {
        const auto idx = LexicalIndex::build(two_records(), {});
        const auto& test = idx.field(Field::test);
        CHECK(test.doc_count() == 2);
        CHECK(test.df(*test.term_id("glucose")) == 2);
        CHECK(test.df(*test.term_id("serum")) == 1);
        CHECK(test.avgdl() == doctest::Approx(2.0).epsilon(1e-12));
    }
    TEST_CASE("empty unit has length zero") {
        const auto idx = LexicalIndex::build({fixtures::record("A", "x", "blood", ""), fixtures::record("B", "y", "", "g/l")}, {});
        CHECK(idx.field(Field::unit).doc_length(*idx.find("A")) == 0);
        CHECK(idx.field(Field::unit).doc_length(*idx.find("B")) == 3);
    }
    TEST_CASE("empty index") {
        const auto idx = LexicalIndex::build({}, {});
        CHECK(idx.size() == 0);
        CHECK(idx.field(Field::test).doc_count() == 0);
        CHECK_THROWS_AS(idx.bm25_field_score(Field::test, std::vector<std::string>{"x"}, "A"), UnknownRecord);
    }
    TEST_CASE("duplicate ids rejected") {
        CHECK_THROWS_AS(LexicalIndex::build({fixtures::record("A", "x", "", ""), fixtures::record("A", "y", "", "")}, {}),
                        DuplicateIdError);
    }
    TEST_CASE("avgdl is the mean doc length and postings reference known docs") {
        const auto idx = LexicalIndex::build(fixtures::lab_records(), fixtures::seed_dictionary());
        for (auto f : {Field::test, Field::sample, Field::unit}) {
            const auto& fi = idx.field(f);
            double sum = 0;
            for (std::size_t d = 0; d < fi.doc_count(); ++d) sum += fi.doc_length(d);
            CHECK(fi.avgdl() == doctest::Approx(sum / static_cast<double>(fi.doc_count())).epsilon(1e-12));
            for (std::uint32_t t = 0; t < fi.vocabulary().size(); ++t) {
                for (const auto& p : fi.postings(t)) CHECK(p.doc < fi.doc_count());
            }
            CHECK(fi.doc_count() == idx.size());
        }
    }
    TEST_CASE("record synonyms are indexed into the test field") {
        const auto idx = LexicalIndex::build(fixtures::lab_records(), {});
        const std::vector<std::string> q{"hgb"};
        CHECK(idx.bm25_field_score(Field::test, q, "R03") > 0);
    }
    TEST_CASE("invalid params") {
        CHECK_THROWS_AS(LexicalIndex::build({}, {}, Bm25Params{-1, 0.5}), InvalidArgument);
        CHECK_THROWS_AS(LexicalIndex::build({}, {}, Bm25Params{1.2, 1.5}), InvalidArgument);
    }
}

TEST_SUITE("bm25_field_score") {
    TEST_CASE("hand-evaluated ln 2") {
        const auto idx = LexicalIndex::build(two_records(), {});
        const std::vector<std::string> q{"serum"};
        CHECK(std::abs(idx.bm25_field_score(Field::test, q, "A") - std::log(2.0)) < 1e-12);
    }
    TEST_CASE("absent term and empty query score zero") {
        const auto idx = LexicalIndex::build(two_records(), {});
        CHECK(idx.bm25_field_score(Field::test, std::vector<std::string>{"sodium"}, "A") == 0.0);
        CHECK(idx.bm25_field_score(Field::test, std::vector<std::string>{}, "A") == 0.0);
        CHECK_THROWS_AS(idx.bm25_field_score(Field::test, std::vector<std::string>{"x"}, "Z"), UnknownRecord);
    }
    TEST_CASE("idf is nonnegative for every df") {
        for (std::size_t n = 1; n < 50; ++n) {
            for (std::size_t df = 0; df <= n; ++df) CHECK(bm25_idf(n, df) >= 0.0);
        }
    }
    TEST_CASE("tf monotone and length penalty") {
        const Bm25Params p;
        for (double tf = 1; tf < 20; tf += 1) CHECK(bm25_tf_part(tf + 1, 5, 4, p) >= bm25_tf_part(tf, 5, 4, p));
        for (double len = 1; len < 20; len += 1) CHECK(bm25_tf_part(2, len + 1, 4, p) < bm25_tf_part(2, len, 4, p));
        const Bm25Params flat{1.2, 0.0};
        CHECK(bm25_tf_part(2, 9, 4, flat) == bm25_tf_part(2, 1, 4, flat));
    }
    TEST_CASE("random corpora match the direct formula") {
        std::mt19937 gen(11);
        const std::vector<std::string> words{"alpha", "beta", "gamma", "delta"};
        for (int trial = 0; trial < 300; ++trial) {
            const std::size_t n = 1 + gen() % 20;
            std::vector<ReferenceRecord> recs;
            for (std::size_t i = 0; i < n; ++i) {
                std::string text;
                const std::size_t len = 1 + gen() % 6;
                for (std::size_t j = 0; j < len; ++j) text += words[gen() % words.size()] + " ";
                recs.push_back(fixtures::record("D" + std::to_string(i), text, "", ""));
            }
            const Bm25Params p{0.5 + (gen() % 100) / 50.0, (gen() % 101) / 100.0};
            const auto idx = LexicalIndex::build(recs, {}, p);
            const auto docs = oracle::field_documents(recs);
            std::vector<std::string> q;
            const std::size_t qn = gen() % 5;
            for (std::size_t j = 0; j < qn; ++j) q.push_back(words[gen() % words.size()]);
            std::sort(q.begin(), q.end());
            q.erase(std::unique(q.begin(), q.end()), q.end());
            for (std::size_t d = 0; d < n; ++d) {
                const double got = idx.bm25_field_score(Field::test, q, recs[d].id);
                CHECK(std::abs(got - oracle::bm25(docs[0], q, d, p.k1, p.b)) < 1e-9);
            }
        }
    }
}

TEST_SUITE("fielded_bm25") {
    TEST_CASE("projection and weighting") {
        const auto idx = LexicalIndex::build(two_records(), {});
        const Triad q("serum", "", "");
        CHECK(idx.fielded_bm25(q, {1, 1, 0, 0, 0}, "A") == 0.0);
        const double test_only = idx.fielded_bm25(q, {1, 1, 1, 0, 0}, "A");
        CHECK(test_only == doctest::Approx(idx.bm25_field_score(Field::test, std::vector<std::string>{"serum"}, "A")));
        CHECK(std::abs(idx.fielded_bm25(q, {1, 1, 2, 1, 1}, "A") - 2 * std::log(2.0)) < 1e-12);
        CHECK(idx.fielded_bm25(Triad("sodium", "", ""), {}, "A") == 0.0);
    }
    TEST_CASE("matches the oracle with synonyms and fuzzy terms") {
        const auto recs = fixtures::lab_records();
        const auto dict = fixtures::seed_dictionary();
        const auto idx = LexicalIndex::build(recs, dict);
        const std::vector<Triad> queries{
            {"hemglobin", "bld", "g/dl"},         {"Glucose", "ser", "mg/100ml"}, {"platelets", "blood", "thou/ul"},
            {"creatinin", "urine", "mg/dl"},      {"hgb", "whole blood", ""},     {"white blood cell count", "", "k/ul"},
            {"potasium serum", "plas", "mmol/l"}, {"albumine", "plasma", "g/l"},  {"sodum", "serum/plasma", "meq/l"},
        };
        const WeightVector w{1, 1, 1.5, 0.7, 0.3};
        for (const auto& q : queries) {
            for (std::size_t d = 0; d < recs.size(); ++d) {
                for (std::size_t e : {0u, 1u, 2u}) {
                    const double got = idx.fielded_bm25(q, w, recs[d].id, e);
                    CHECK(std::abs(got - oracle::fielded_bm25(recs, dict, q, w, d, e)) < 1e-9);
                }
            }
        }
    }
    TEST_CASE("synonym symmetry: any group member reaches records indexed under another") {
        const auto dict = fixtures::dictionary("sample: plasma, blood plasma, plas\nunit: 10^3/l, thou/l, thousand/l\n");
        const auto idx = LexicalIndex::build(
            {fixtures::record("P", "x", "plasma", "10^3/l"), fixtures::record("Q", "x", "urine", "mg/dl")}, dict);
        for (const auto& s : dict.groups(Field::sample)[0]) {
            CHECK(idx.fielded_bm25(Triad("x", s, ""), {1, 1, 0, 1, 0}, "P") > 0);
            CHECK(idx.fielded_bm25(Triad("x", s, ""), {1, 1, 0, 1, 0}, "Q") == 0);
        }
        for (const auto& u : dict.groups(Field::unit)[0]) CHECK(idx.fielded_bm25(Triad("x", "", u), {1, 1, 0, 0, 1}, "P") > 0);
    }
}

TEST_SUITE("expand_query") {
    TEST_CASE("unit word forms reach caret notation") {
        const auto e = expand_query(Triad("x", "", "thou/l"), fixtures::seed_dictionary());
        CHECK(contains(e[2], "10^3/l"));
        CHECK(e[2].front() == "thou/l");
    }
    TEST_CASE("compound sample unions both groups") {
        const auto d = fixtures::seed_dictionary();
        const auto e = expand_query(Triad("x", "serum/plasma", ""), d);
        for (const auto& member : d.group_of("serum", Field::sample)) {
            for (const auto& t : tokenize(member)) CHECK(contains(e[1], t));
        }
        for (const auto& member : d.group_of("plasma", Field::sample)) {
            for (const auto& t : tokenize(member)) CHECK(contains(e[1], t));
        }
    }
    TEST_CASE("ungrouped token stays alone, no duplicates") {
        const auto e = expand_query(Triad("zymase zymase", "", ""), fixtures::seed_dictionary());
        CHECK(e[0] == std::vector<std::string>{"zymase"});
        CHECK(e[1].empty());
    }
}

TEST_SUITE("fuzzy") {
    TEST_CASE("examples") {
        const std::vector<std::string> hb{"hemoglobin"};
        const auto m = fuzzy_match_terms("hemglobin", hb, 1);
        REQUIRE(m.size() == 1);
        CHECK(m[0].term == "hemoglobin");
        CHECK(m[0].edits == 1);
        CHECK(m[0].weight() == 0.5);
        const std::vector<std::string> g{"glucose"};
        CHECK(fuzzy_match_terms("glucose", g, 0) == std::vector<FuzzyMatch>{{"glucose", 0}});
        const std::vector<std::string> xyz{"xyz"};
        CHECK(fuzzy_match_terms("abc", xyz, 2).empty());
        CHECK_THROWS_AS(fuzzy_match_terms("abc", xyz, 3), InvalidArgument);
    }
    TEST_CASE("transposition counts as one edit") {
        CHECK(damerau_levenshtein(std::string_view("glucsoe"), std::string_view("glucose")) == 1);
        CHECK(damerau_levenshtein(std::string_view("ca"), std::string_view("abc")) == 3);
    }
    TEST_CASE("distance agrees with the full-matrix recurrence") {
        std::mt19937 gen(5);
        const std::u32string alphabet = U"abcdeé";
        for (int i = 0; i < 3000; ++i) {
            std::u32string a, b;
            for (std::size_t j = gen() % 8; j > 0; --j) a += alphabet[gen() % alphabet.size()];
            for (std::size_t j = gen() % 8; j > 0; --j) b += alphabet[gen() % alphabet.size()];
            const auto truth = oracle::osa_distance(a, b);
            CHECK(damerau_levenshtein(a, b, 100) == truth);
            const std::size_t cap = gen() % 3;
            const auto capped = damerau_levenshtein(a, b, cap);
            if (truth <= cap) CHECK(capped == truth);
            else CHECK(capped > cap);
        }
    }
}

TEST_CASE("index snapshot round-trips") {
    fixtures::TempDir dir;
    const auto idx = LexicalIndex::build(fixtures::lab_records(), fixtures::seed_dictionary(), {1.5, 0.6});
    idx.save(dir / "idx.bin");
    const auto back = LexicalIndex::load(dir / "idx.bin");
    CHECK(back.size() == idx.size());
    CHECK(back.params().k1 == 1.5);
    const Triad q("hemglobin", "bld", "g/dl");
    for (const auto& r : idx.records()) CHECK(back.fielded_bm25(q, {}, r.id) == idx.fielded_bm25(q, {}, r.id));
    {
        std::ofstream bad(dir / "bad.bin");
        bad << "not an index";
    }
    CHECK_THROWS_AS(LexicalIndex::load(dir / "bad.bin"), ParseError);
    CHECK_THROWS_AS(LexicalIndex::load(dir / "missing.bin"), FileError);
}
