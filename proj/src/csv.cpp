#include "saekit/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>

#include "saekit/error.hpp"

namespace saekit::csv {

Table::Table(std::string source, std::vector<std::string> header, std::vector<Row> rows)
    : source_(std::move(source)), header_(std::move(header)), rows_(std::move(rows)) {}

std::optional<std::size_t> Table::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (header_[i] == name) return i;
  }
  return std::nullopt;
}

std::size_t Table::column(std::string_view name) const {
  if (auto idx = find_column(name)) return *idx;
  throw ParseError(source_, 1, "missing required column '" + std::string(name) + "'");
}

namespace {

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return c != ' ' && c != '\t' && c != '\r'; };
  std::size_t b = 0;
  while (b < s.size() && !not_space(s[b])) ++b;
  std::size_t e = s.size();
  while (e > b && !not_space(s[e - 1])) --e;
  return s.substr(b, e - b);
}

// Reads one logical record, which may span lines inside quotes.
bool read_record(std::istream& in, std::size_t& line_no, const std::string& source,
                 std::vector<std::string>& fields, std::size_t& start_line) {
  fields.clear();
  std::string line;
  if (!std::getline(in, line)) return false;
  ++line_no;
  start_line = line_no;

  std::string field;
  bool in_quotes = false;
  bool was_quoted = false;
  std::size_t i = 0;
  for (;;) {
    if (i >= line.size()) {
      if (in_quotes) {
        field.push_back('\n');
        if (!std::getline(in, line)) {
          throw ParseError(source, start_line, "unterminated quoted field");
        }
        ++line_no;
        i = 0;
        continue;
      }
      fields.push_back(was_quoted ? field : trim(field));
      return true;
    }
    char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      in_quotes = true;
      was_quoted = true;
    } else if (c == ',') {
      fields.push_back(was_quoted ? field : trim(field));
      field.clear();
      was_quoted = false;
    } else if (c != '\r') {
      field.push_back(c);
    }
    ++i;
  }
}

bool blank(const std::vector<std::string>& fields) {
  return fields.size() == 1 && fields[0].empty();
}

}  // namespace

Table parse(std::istream& in, const std::string& source) {
  std::size_t line_no = 0;
  std::size_t start = 0;
  std::vector<std::string> fields;
  std::vector<std::string> header;
  while (read_record(in, line_no, source, fields, start)) {
    if (blank(fields)) continue;
    header = fields;
    break;
  }
  if (header.empty()) throw ParseError(source, 1, "empty file: header row is mandatory");
  if (header[0].rfind("\xEF\xBB\xBF", 0) == 0) header[0] = header[0].substr(3);
  for (std::size_t i = 0; i < header.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (header[i] == header[j]) {
        throw ParseError(source, start, "duplicate column '" + header[i] + "'");
      }
    }
  }

  std::vector<Row> rows;
  while (read_record(in, line_no, source, fields, start)) {
    if (blank(fields)) continue;
    if (fields.size() != header.size()) {
      throw ParseError(source, start,
                       "expected " + std::to_string(header.size()) + " fields, found " +
                           std::to_string(fields.size()));
    }
    rows.push_back(Row{start, fields});
  }
  return Table(source, std::move(header), std::move(rows));
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  return parse(in, path);
}

std::string quote(std::string_view field) {
  bool needs = field.find_first_of(",\"\n\r") != std::string_view::npos;
  if (!needs) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  if (value == 0.0) return "0";  // folds -0
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

double parse_double(const Row& row, std::size_t col, const std::string& source,
                    const std::string& column_name) {
  const std::string& s = row.fields.at(col);
  if (s == "NA" || s == "NaN" || s == "nan") return std::nan("");
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(source, row.line,
                     "column '" + column_name + "': '" + s + "' is not a number");
  }
  return value;
}

long long parse_integer(const Row& row, std::size_t col, const std::string& source,
                        const std::string& column_name) {
  const std::string& s = row.fields.at(col);
  long long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw ParseError(source, row.line,
                     "column '" + column_name + "': '" + s + "' is not an integer");
  }
  return value;
}

}  // namespace saekit::csv
