#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace labharm {

/// Canonical text form used by every index and comparison: superscript runs
/// become caret notation (10³ -> 10^3), then NFKC with case folding, then
/// whitespace is collapsed and trimmed. Idempotent.
std::string normalize_text(std::string_view raw);

/// Splits normalized text on whitespace. A token containing '/' is kept
/// whole and also contributes each non-empty '/'-separated part, so "mg/dl"
/// yields {"mg/dl", "mg", "dl"}.
std::vector<std::string> tokenize(std::string_view normalized);

/// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

/// Decodes UTF-8 into code points (invalid bytes map to U+FFFD).
std::u32string to_code_points(std::string_view s);

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace labharm
