#pragma once

#include <string>
#include <vector>

namespace ibac {

// 17 significant digits: round-trips any double.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string to_string() const;
  std::size_t column(const std::string& name) const;  // throws FormatError if absent
};

// Plain comma-separated text without quoting; every file here is numeric or
// simple identifiers. The first line is the header.
CsvTable parse_csv(const std::string& text);

}  // namespace ibac
