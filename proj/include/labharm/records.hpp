#pragma once

#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <vector>

#include "labharm/types.hpp"

namespace labharm {

/// Reference CSV with header
/// `id,test,sample,unit,labcode,preferred_unit,conversion_factor,synonyms`
/// (synonyms '|'-separated). Throws ParseError on malformed rows and
/// DuplicateIdError on repeated ids.
std::vector<ReferenceRecord> read_reference_csv(std::istream& in);
std::vector<ReferenceRecord> load_reference_csv(const std::filesystem::path& path);
void write_reference_csv(std::ostream& out, std::span<const ReferenceRecord> records);

}  // namespace labharm

namespace labharm {

/// One unvalidated row of a query CSV with header
/// `id,test,sample,unit,code_hint,frequency,min,max,mean,std`. Fields are
/// kept verbatim; empty stats cells mean "absent".
struct RawQueryRow {
    std::size_t line = 0;
    std::string id, test, sample, unit, code_hint, frequency, min, max, mean, std;
};

inline const std::vector<std::string> kQueryCsvHeader{"id",        "test", "sample", "unit", "code_hint",
                                                      "frequency", "min",  "max",    "mean", "std"};

/// Columns are matched by header name; any subset of kQueryCsvHeader in
/// any order, `test` required. Throws ParseError on unknown or duplicate
/// columns and rows with the wrong width.
std::vector<RawQueryRow> read_query_rows(std::istream& in);
void write_query_rows(std::ostream& out, std::span<const RawQueryRow> rows);

}  // namespace labharm
