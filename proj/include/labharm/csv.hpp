#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace labharm::csv {

/// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
/// newlines. Returns nullopt at end of input.
std::optional<std::vector<std::string>> read_row(std::istream& in);

/// Quotes a field when it contains a comma, quote or line break.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace labharm::csv
