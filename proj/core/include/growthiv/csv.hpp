#pragma once

#include <cstdio>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace growthiv::csv {

// Minimal comma-separated reader: double-quoted fields may contain commas
// and doubled quotes; no embedded newlines. Trailing '\r' is stripped.
std::vector<std::string> split_line(std::string_view line);

// Reads the next non-empty line. Returns false at end of input.
bool next_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no);

// Quotes a field only when it contains a comma, quote or newline.
std::string escape(std::string_view field);

// 17 significant digits; "nan"/"inf" spelled out.
std::string format_real(double v);

// Empty string for nullopt.
std::string format_optional(const std::optional<double>& v);

// Strict numeric parsing; nullopt for an empty field. Throws
// std::invalid_argument on garbage.
std::optional<double> parse_real(std::string_view s);
std::optional<long long> parse_integer(std::string_view s);

}  // namespace growthiv::csv
