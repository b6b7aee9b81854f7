#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sperf {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using CsvRow = std::vector<std::string>;

/// RFC 4180 table: a header row plus data rows of equal width.
struct CsvTable {
  CsvRow header;
  std::vector<CsvRow> rows;

  std::size_t column(std::string_view name) const;  // throws CsvError if absent
  bool has_column(std::string_view name) const;
  friend bool operator==(const CsvTable&, const CsvTable&) = default;
};

/// Fields are quoted only when they contain a comma, quote, CR or LF. Lines
/// end with CRLF.
std::string format_csv(const CsvTable& table);
std::string quote_csv_field(std::string_view field);

/// Accepts CRLF or LF line ends. Throws CsvError on ragged rows or broken quoting.
CsvTable parse_csv(std::string_view text);

}  // namespace sperf
