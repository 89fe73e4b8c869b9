#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace vsens {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_shortest(double value);

/// Rounds to `digits` significant decimal digits (and folds -0 to 0), so the
/// shortest rendering of the result has at most that many digits.
double quantize_significant(double value, int digits = 9);

/// Strict full-string parse; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view text);

}  // namespace vsens
