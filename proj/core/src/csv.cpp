#include "stencilperf/csv.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace sperf {

std::size_t CsvTable::column(std::string_view name) const {
  const auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw CsvError(fmt::format("no column named '{}'", name));
  return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(std::string_view name) const {
  return std::find(header.begin(), header.end(), name) != header.end();
}

std::string quote_csv_field(std::string_view f) {
  if (f.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(f);
  std::string out = "\"";
  for (const char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_csv(const CsvTable& t) {
  std::string out;
  auto emit = [&](const CsvRow& row) {
    if (row.size() != t.header.size())
      throw CsvError(fmt::format("row has {} fields, header has {}", row.size(), t.header.size()));
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += quote_csv_field(row[i]);
    }
    out += "\r\n";
  };
  emit(t.header);
  for (const auto& r : t.rows) emit(r);
  return out;
}

CsvTable parse_csv(std::string_view text) {
  std::vector<CsvRow> records;
  CsvRow row;
  std::string field;
  bool quoted = false, field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    records.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
          if (i + 1 < text.size() && text[i + 1] != ',' && text[i + 1] != '\r' &&
              text[i + 1] != '\n')
            throw CsvError(fmt::format("line {}: text after closing quote", line));
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started || !field.empty())
          throw CsvError(fmt::format("line {}: quote inside an unquoted field", line));
        quoted = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        throw CsvError(fmt::format("line {}: bare carriage return", line));
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field += c;
        field_started = true;
    }
  }
  if (quoted) throw CsvError("unterminated quoted field");
  if (field_started || !field.empty() || !row.empty()) end_row();

  CsvTable t;
  if (records.empty()) throw CsvError("empty CSV input");
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      throw CsvError(fmt::format("row {} has {} fields, header has {}", r + 1, records[r].size(),
                                 t.header.size()));
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

}  // namespace sperf
