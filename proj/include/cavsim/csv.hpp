#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace cavsim::csv {

/// Shortest representation that parses back to the same double.
std::string format(double value);
std::string format(std::int64_t value);
inline std::string format(int value) { return format(static_cast<std::int64_t>(value)); }
inline std::string format(std::size_t value) {
  return format(static_cast<std::int64_t>(value));
}

/// Splits one line on commas. Quoting is not supported; none of the schemas
/// contain commas inside fields.
std::vector<std::string_view> split(std::string_view line);

/// Strict numeric parses; throw ParseError carrying row and column.
double parse_double(std::string_view field, std::size_t row, const std::string& column);
std::int64_t parse_int(std::string_view field, std::size_t row, const std::string& column);

/// Parsed table: header names plus rows of raw fields.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of a header column; throws ParseError when absent.
  std::size_t column(std::string_view name) const;
  bool has_column(std::string_view name) const;
};

/// Reads a header row and data rows; rejects rows whose field count differs
/// from the header. Blank trailing lines and a trailing CR are ignored.
Table read(std::istream& in);
Table read_file(const std::string& path);

/// Writes fields joined by commas plus LF.
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace cavsim::csv
