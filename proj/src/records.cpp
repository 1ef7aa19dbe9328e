#include "labharm/records.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include "labharm/csv.hpp"
#include "labharm/error.hpp"
#include "labharm/text.hpp"

namespace labharm {

std::string_view to_string(Field f) {
    switch (f) {
    case Field::test: return "test";
    case Field::sample: return "sample";
    case Field::unit: return "unit";
    }
    return "?";
}

Field parse_field(std::string_view s) {
    if (s == "test") return Field::test;
    if (s == "sample") return Field::sample;
    if (s == "unit") return Field::unit;
    throw UnknownField("unknown field '" + std::string(s) + "'");
}

Triad::Triad(std::string_view test, std::string_view sample, std::string_view unit)
    : test_(normalize_text(test)), sample_(normalize_text(sample)), unit_(normalize_text(unit)) {
    if (test_.empty()) throw InvalidArgument("triad test name is empty");
}

const std::string& Triad::get(Field f) const {
    switch (f) {
    case Field::test: return test_;
    case Field::sample: return sample_;
    case Field::unit: return unit_;
    }
    throw UnknownField("unknown field");
}

Triad Triad::with(Field f, std::string_view value) const {
    Triad t = *this;
    switch (f) {
    case Field::test:
        t.test_ = normalize_text(value);
        if (t.test_.empty()) throw InvalidArgument("triad test name is empty");
        break;
    case Field::sample: t.sample_ = normalize_text(value); break;
    case Field::unit: t.unit_ = normalize_text(value); break;
    }
    return t;
}

double WeightVector::field(Field f) const {
    switch (f) {
    case Field::test: return w_test;
    case Field::sample: return w_sample;
    case Field::unit: return w_unit;
    }
    return 0.0;
}

bool WeightVector::within_bounds() const {
    auto in = [](double v, double hi) { return std::isfinite(v) && v >= 0.0 && v <= hi; };
    return in(alpha, kFusionMax) && in(beta, kFusionMax) && in(w_test, kFieldMax) && in(w_sample, kFieldMax) &&
           in(w_unit, kFieldMax);
}

void WeightVector::validate() const {
    if (!within_bounds()) throw InvalidArgument("weight vector outside bounds (alpha,beta in [0,10]; w in [0,5])");
}

std::string_view to_string(TagStatus t) {
    switch (t) {
    case TagStatus::Missing: return "Missing";
    case TagStatus::Verified: return "Verified";
    case TagStatus::Pending: return "Pending";
    case TagStatus::Human: return "Human";
    case TagStatus::Copy: return "Copy";
    case TagStatus::Reranked: return "Reranked";
    }
    return "?";
}

TagStatus parse_tag_status(std::string_view s) {
    for (auto t : {TagStatus::Missing, TagStatus::Verified, TagStatus::Pending, TagStatus::Human, TagStatus::Copy,
                   TagStatus::Reranked}) {
        if (to_string(t) == s) return t;
    }
    throw ParseError("unknown tag status '" + std::string(s) + "'");
}

namespace {

double parse_double(const std::string& s, std::size_t line) {
    double v = 0;
    const auto t = trim(s);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (ec != std::errc() || ptr != t.data() + t.size()) {
        throw ParseError("line " + std::to_string(line) + ": bad number '" + s + "'");
    }
    return v;
}

}  // namespace

std::vector<ReferenceRecord> read_reference_csv(std::istream& in) {
    static const std::vector<std::string> kHeader{"id", "test", "sample", "unit", "labcode", "preferred_unit",
                                                  "conversion_factor", "synonyms"};
    auto header = csv::read_row(in);
    if (!header) return {};
    if (*header != kHeader) throw ParseError("reference CSV header mismatch");

    std::vector<ReferenceRecord> records;
    std::unordered_set<std::string> ids;
    std::size_t line = 1;
    while (auto row = csv::read_row(in)) {
        ++line;
        if (row->size() == 1 && trim((*row)[0]).empty()) continue;
        if (row->size() != kHeader.size()) {
            throw ParseError("line " + std::to_string(line) + ": expected 8 fields, got " +
                             std::to_string(row->size()));
        }
        auto& r = *row;
        ReferenceRecord rec;
        rec.id = trim(r[0]);
        if (rec.id.empty()) throw ParseError("line " + std::to_string(line) + ": empty id");
        try {
            rec.triad = Triad(r[1], r[2], r[3]);
        } catch (const InvalidArgument& e) {
            throw ParseError("line " + std::to_string(line) + ": " + e.what());
        }
        rec.labcode = trim(r[4]);
        rec.preferred_unit = normalize_text(r[5]);
        rec.conversion_factor = parse_double(r[6], line);
        if (!(rec.conversion_factor > 0.0)) {
            throw ParseError("line " + std::to_string(line) + ": conversion_factor must be > 0");
        }
        if (!trim(r[7]).empty()) {
            for (const auto& s : split(r[7], '|')) {
                auto n = normalize_text(s);
                if (!n.empty()) rec.synonyms.push_back(std::move(n));
            }
        }
        if (!ids.insert(rec.id).second) throw DuplicateIdError("duplicate record id '" + rec.id + "'");
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<ReferenceRecord> load_reference_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw FileError("cannot open " + path.string());
    return read_reference_csv(in);
}

void write_reference_csv(std::ostream& out, std::span<const ReferenceRecord> records) {
    csv::write_row(out, {"id", "test", "sample", "unit", "labcode", "preferred_unit", "conversion_factor", "synonyms"});
    for (const auto& r : records) {
        std::string syn;
        for (std::size_t i = 0; i < r.synonyms.size(); ++i) {
            if (i) syn += '|';
            syn += r.synonyms[i];
        }
        char buf[64];
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, r.conversion_factor);
        csv::write_row(out, {r.id, r.triad.test(), r.triad.sample(), r.triad.unit(), r.labcode, r.preferred_unit,
                             std::string(buf, ptr), syn});
    }
}

}  // namespace labharm

namespace labharm {

std::vector<RawQueryRow> read_query_rows(std::istream& in) {
    auto header = csv::read_row(in);
    if (!header) return {};
    std::vector<std::string RawQueryRow::*> slots;
    for (auto name : *header) {
        name = trim(name);
        const auto it = std::find(kQueryCsvHeader.begin(), kQueryCsvHeader.end(), name);
        if (it == kQueryCsvHeader.end()) throw ParseError("query CSV: unknown column '" + name + "'");
        static constexpr std::string RawQueryRow::*kSlots[] = {
            &RawQueryRow::id,   &RawQueryRow::test, &RawQueryRow::sample, &RawQueryRow::unit, &RawQueryRow::code_hint,
            &RawQueryRow::frequency, &RawQueryRow::min, &RawQueryRow::max, &RawQueryRow::mean, &RawQueryRow::std};
        const auto slot = kSlots[it - kQueryCsvHeader.begin()];
        if (std::find(slots.begin(), slots.end(), slot) != slots.end()) {
            throw ParseError("query CSV: duplicate column '" + name + "'");
        }
        slots.push_back(slot);
    }
    if (std::find(slots.begin(), slots.end(), &RawQueryRow::test) == slots.end()) {
        throw ParseError("query CSV: missing column 'test'");
    }
    std::vector<RawQueryRow> rows;
    std::size_t line = 1;
    while (auto row = csv::read_row(in)) {
        ++line;
        if (row->size() == 1 && (*row)[0].empty()) continue;
        if (row->size() != slots.size()) {
            throw ParseError("line " + std::to_string(line) + ": expected " + std::to_string(slots.size()) +
                             " fields, got " + std::to_string(row->size()));
        }
        RawQueryRow r;
        r.line = line;
        for (std::size_t i = 0; i < slots.size(); ++i) r.*slots[i] = std::move((*row)[i]);
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_query_rows(std::ostream& out, std::span<const RawQueryRow> rows) {
    csv::write_row(out, kQueryCsvHeader);
    for (const auto& r : rows) {
        csv::write_row(out, {r.id, r.test, r.sample, r.unit, r.code_hint, r.frequency, r.min, r.max, r.mean, r.std});
    }
}

}  // namespace labharm
