#pragma once

#include <string>
#include <vector>

namespace tatdv {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; -1 when absent.
  int column(const std::string& name) const;
};

// Plain comma-separated values, no quoting (the schemas never embed
// commas); tolerates trailing \r and a final newline-less row.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& content);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

// Shortest representation that round-trips the double exactly.
std::string format_exact(double v);
// Fixed-precision decimal for report CSVs.
std::string format_fixed(double v, int decimals);

}  // namespace tatdv
