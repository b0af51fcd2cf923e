#include "cavsim/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <system_error>

#include "cavsim/error.hpp"

namespace cavsim::csv {

std::string format(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string format(std::int64_t value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_double(std::string_view field, std::size_t row, const std::string& column) {
  if (field == "nan") return std::nan("");
  if (field == "inf") return HUGE_VAL;
  if (field == "-inf") return -HUGE_VAL;
  double value = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw ParseError("row " + std::to_string(row) + ", column '" + column +
                         "': not a number: '" + std::string(field) + "'",
                     row, column);
  return value;
}

std::int64_t parse_int(std::string_view field, std::size_t row, const std::string& column) {
  std::int64_t value = 0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || res.ec != std::errc() || res.ptr != field.data() + field.size())
    throw ParseError("row " + std::to_string(row) + ", column '" + column +
                         "': not an integer: '" + std::string(field) + "'",
                     row, column);
  return value;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return i;
  throw ParseError("missing column '" + std::string(name) + "'", 1, std::string(name));
}

bool Table::has_column(std::string_view name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

Table read(std::istream& in) {
  Table t;
  std::string line;
  std::size_t row = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split(line);
    if (!have_header) {
      for (auto f : fields) t.header.emplace_back(f);
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size())
      throw ParseError("row " + std::to_string(row) + ": expected " +
                           std::to_string(t.header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       row, "");
    auto& r = t.rows.emplace_back();
    r.reserve(fields.size());
    for (auto f : fields) r.emplace_back(f);
  }
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  return read(in);
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << fields[i];
  }
  out << '\n';
}

}  // namespace cavsim::csv
