#ifndef SAEKIT_CSV_HPP
#define SAEKIT_CSV_HPP

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace saekit::csv {

struct Row {
  std::size_t line = 0;  // 1-based physical line of the record start
  std::vector<std::string> fields;
};

/// A parsed CSV table with a mandatory header row.
class Table {
 public:
  Table(std::string source, std::vector<std::string> header, std::vector<Row> rows);

  const std::string& source() const noexcept { return source_; }
  const std::vector<std::string>& header() const noexcept { return header_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }

  std::optional<std::size_t> find_column(std::string_view name) const;
  /// Column index, or ValidationError naming the missing column.
  std::size_t column(std::string_view name) const;

 private:
  std::string source_;
  std::vector<std::string> header_;
  std::vector<Row> rows_;
};

// RFC 4180 style: comma separated, double-quoted fields, "" escapes a quote.
// A UTF-8 byte-order mark on the first line is skipped. Blank lines are ignored.
Table parse(std::istream& in, const std::string& source);
Table read_file(const std::string& path);

std::string quote(std::string_view field);

/// Formats with 6 significant digits (printf %.6g); NaN prints as "NA".
std::string format_number(double value);

double parse_double(const Row& row, std::size_t col, const std::string& source,
                    const std::string& column_name);
long long parse_integer(const Row& row, std::size_t col, const std::string& source,
                        const std::string& column_name);

}  // namespace saekit::csv

#endif  // SAEKIT_CSV_HPP
