#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>

#include "fixtures.hpp"
#include "labharm/csv.hpp"
#include "labharm/error.hpp"
#include "labharm/records.hpp"
#include "labharm/synonyms.hpp"
#include "labharm/text.hpp"
#include "labharm/types.hpp"

using namespace labharm;

TEST_SUITE("normalize_text") {
    TEST_CASE("canonical examples") {
        CHECK(normalize_text("  Hemoglobin ") == "hemoglobin");
        CHECK(normalize_text("10³/L") == "10^3/l");
        CHECK(normalize_text("") == "");
        CHECK(normalize_text("   ") == "");
        CHECK(normalize_text("Serum\t \n Plasma") == "serum plasma");
    }

    TEST_CASE("superscript runs and full-width forms") {
        CHECK(normalize_text("10¹²/L") == "10^12/l");
        CHECK(normalize_text("x10⁹/l") == "x10^9/l");
        CHECK(normalize_text("ｍｇ／ｄＬ") == "mg/dl");
        CHECK(normalize_text("µmol/L") == normalize_text("μmol/l"));
    }

    TEST_CASE("idempotent and trimmed on random input") {
        std::mt19937 gen(7);
        const std::vector<std::string> pieces{"A", "b", " ", "\t", "³", "²", "/", "Ü", "ß", "  ", "10", "ﬁ", "Ⅻ", "x"};
        for (int i = 0; i < 2000; ++i) {
            std::string s;
            const int n = static_cast<int>(gen() % 12);
            for (int j = 0; j < n; ++j) s += pieces[gen() % pieces.size()];
            const auto once = normalize_text(s);
            CHECK(normalize_text(once) == once);
            if (!once.empty()) {
                CHECK(once.front() != ' ');
                CHECK(once.back() != ' ');
            }
            CHECK(once.find("  ") == std::string::npos);
        }
    }
}

TEST_CASE("tokenize keeps slash units whole and split") {
    CHECK(tokenize("mg/dl") == std::vector<std::string>{"mg/dl", "mg", "dl"});
    CHECK(tokenize("glucose serum") == std::vector<std::string>{"glucose", "serum"});
    CHECK(tokenize("").empty());
    CHECK(tokenize("/") == std::vector<std::string>{"/"});
}

TEST_SUITE("Triad") {
    TEST_CASE("normalizes and compares on normalized fields") {
        const Triad a("  Hemoglobin", "BLOOD", "g/dL");
        const Triad b("hemoglobin", "blood", "g/dl");
        CHECK(a == b);
        CHECK(a.test() == "hemoglobin");
        CHECK(a.get(Field::unit) == "g/dl");
        CHECK(a.with(Field::sample, "Serum").sample() == "serum");
    }
    TEST_CASE("empty test rejected") {
        CHECK_THROWS_AS(Triad("  ", "blood", "g/dl"), InvalidArgument);
        CHECK_NOTHROW(Triad("x", "", ""));
    }
    TEST_CASE("field names") {
        CHECK(parse_field("sample") == Field::sample);
        CHECK(to_string(Field::unit) == "unit");
        CHECK_THROWS_AS(parse_field("units"), UnknownField);
    }
}

TEST_CASE("TagStatus is a closed enumeration") {
    for (auto t : {TagStatus::Missing, TagStatus::Verified, TagStatus::Pending, TagStatus::Human, TagStatus::Copy,
                   TagStatus::Reranked}) {
        CHECK(parse_tag_status(to_string(t)) == t);
    }
    CHECK_THROWS_AS(parse_tag_status("pending"), ParseError);
    CHECK_THROWS_AS(parse_tag_status(""), ParseError);
}

TEST_CASE("WeightVector bounds") {
    WeightVector w;
    CHECK(w.within_bounds());
    w.alpha = 10.0;
    w.w_unit = 5.0;
    CHECK_NOTHROW(w.validate());
    w.beta = 10.5;
    CHECK_THROWS_AS(w.validate(), InvalidArgument);
    w.beta = 1;
    w.w_test = -0.1;
    CHECK_FALSE(w.within_bounds());
    const std::array<double, 5> a{1, 2, 3, 4, 5};
    CHECK(WeightVector::from_array(a).to_array() == a);
}

TEST_SUITE("SynonymDictionary") {
    TEST_CASE("group lookup examples") {
        const auto d = fixtures::seed_dictionary();
        const auto plas = d.group_of("plas", Field::sample);
        const std::set<std::string> got(plas.begin(), plas.end()), want{"plasma", "blood plasma", "plas"};
        CHECK(std::includes(got.begin(), got.end(), want.begin(), want.end()));
        const auto thou = d.group_of("THOU/L", Field::unit);
        CHECK(std::find(thou.begin(), thou.end(), "10^3/l") != thou.end());
        CHECK(d.group_of("xyzzy", Field::unit) == SynonymDictionary::Group{"xyzzy"});
    }

    TEST_CASE("every term is in its own group and groups are an equivalence") {
        const auto d = fixtures::seed_dictionary();
        for (auto f : {Field::test, Field::sample, Field::unit}) {
            for (const auto& g : d.groups(f)) {
                for (const auto& t : g) {
                    const auto gt = d.group_of(t, f);
                    CHECK(std::find(gt.begin(), gt.end(), t) != gt.end());
                    CHECK(gt == g);
                    for (const auto& u : g) CHECK(d.equivalent(t, u, f));
                }
            }
        }
    }

    TEST_CASE("parse examples") {
        const auto two = fixtures::dictionary("unit: mg/dl, mg/100ml\nunit: g/l, gm/l\n");
        CHECK(two.groups(Field::unit).size() == 2);
        CHECK(two.groups(Field::sample).empty());
        CHECK_THROWS_AS(fixtures::dictionary("sample: plasma, plas\nsample: serum, plas\n"), OverlapError);
        const auto empty = fixtures::dictionary("");
        for (auto f : {Field::test, Field::sample, Field::unit}) CHECK(empty.groups(f).empty());
        CHECK_THROWS_AS(fixtures::dictionary("colour: red, rouge\n"), ParseError);
        CHECK_THROWS_AS(fixtures::dictionary("just words\n"), ParseError);
        const auto commented = fixtures::dictionary("# header\n\nsample: Plasma, PLASMA, plas\n");
        CHECK(commented.groups(Field::sample).front() == SynonymDictionary::Group{"plasma", "plas"});
    }

    TEST_CASE("write then parse round-trips") {
        const auto d = fixtures::seed_dictionary();
        std::ostringstream out;
        d.write(out);
        std::istringstream in(out.str());
        const auto back = SynonymDictionary::parse(in);
        for (auto f : {Field::test, Field::sample, Field::unit}) CHECK(back.groups(f) == d.groups(f));
    }

    TEST_CASE("record synonyms extend and merge test groups") {
        const auto base = fixtures::dictionary("test: hemoglobin, hb\n");
        const std::vector<ReferenceRecord> recs{fixtures::record("A", "Hemoglobin", "blood", "g/dl", {"hgb"}),
                                                fixtures::record("B", "sodium", "serum", "mmol/l", {"na"})};
        const auto d = base.with_record_synonyms(recs);
        CHECK(d.equivalent("hgb", "hb", Field::test));
        CHECK(d.equivalent("na", "sodium", Field::test));
        CHECK_FALSE(d.equivalent("na", "hb", Field::test));
    }
}

TEST_SUITE("csv") {
    TEST_CASE("quoted fields") {
        std::istringstream in("a,\"b,c\",\"d\"\"e\"\n\"multi\nline\",x\n");
        CHECK(*csv::read_row(in) == std::vector<std::string>{"a", "b,c", "d\"e"});
        CHECK(*csv::read_row(in) == std::vector<std::string>{"multi\nline", "x"});
        CHECK_FALSE(csv::read_row(in).has_value());
    }
    TEST_CASE("escape round-trips") {
        const std::vector<std::string> row{"plain", "with,comma", "quote\"d", "", "new\nline"};
        std::ostringstream out;
        csv::write_row(out, row);
        std::istringstream in(out.str());
        CHECK(*csv::read_row(in) == row);
    }
}

TEST_SUITE("records") {
    TEST_CASE("reference CSV round-trip") {
        const auto recs = fixtures::lab_records();
        std::ostringstream out;
        write_reference_csv(out, recs);
        std::istringstream in(out.str());
        const auto back = read_reference_csv(in);
        REQUIRE(back.size() == recs.size());
        CHECK(back[2].synonyms == std::vector<std::string>{"hgb"});
        CHECK(back[3].triad == recs[3].triad);
    }
    TEST_CASE("reference CSV validation") {
        const std::string header = "id,test,sample,unit,labcode,preferred_unit,conversion_factor,synonyms\n";
        auto parse = [&](const std::string& body) {
            std::istringstream in(header + body);
            return read_reference_csv(in);
        };
        CHECK(parse("A,glucose,serum,mg/dl,1-1,mg/dl,1,\n").size() == 1);
        CHECK_THROWS_AS(parse("A,glucose,serum,mg/dl,1-1,mg/dl,1,\nA,sodium,serum,mmol/l,1-1,mmol/l,1,\n"),
                        DuplicateIdError);
        CHECK_THROWS_AS(parse("A,glucose,serum,mg/dl,1-1,mg/dl,0,\n"), ParseError);
        CHECK_THROWS_AS(parse("A,glucose,serum,mg/dl,1-1,mg/dl,-2,\n"), ParseError);
        CHECK_THROWS_AS(parse("A,,serum,mg/dl,1-1,mg/dl,1,\n"), Error);
        std::istringstream bad("id,test\nA,glucose\n");
        CHECK_THROWS_AS(read_reference_csv(bad), ParseError);
    }
    TEST_CASE("query CSV accepts a column subset") {
        std::istringstream in("test,sample,unit\nGlucose,serum,mg/dl\nsodium,,\n");
        const auto rows = read_query_rows(in);
        REQUIRE(rows.size() == 2);
        CHECK(rows[0].test == "Glucose");
        CHECK(rows[1].line == 3);
        CHECK(rows[1].id.empty());
        std::istringstream unknown("test,colour\nx,red\n");
        CHECK_THROWS_AS(read_query_rows(unknown), ParseError);
        std::istringstream no_test("sample,unit\nserum,mg/dl\n");
        CHECK_THROWS_AS(read_query_rows(no_test), ParseError);
        std::istringstream ragged("test,sample\nx\n");
        CHECK_THROWS_AS(read_query_rows(ragged), ParseError);
    }
}
