#pragma once

#include <string>
#include <vector>

namespace treevar::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Comma-separated, first line is the header. No quoting/escaping: fields in
// this project are mnemonics, dates and numbers.
Table read_file(const std::string& path);
Table parse(const std::string& text);
void write_file(const std::string& path, const Table& table);

double to_double(const std::string& field, const std::string& context);

}  // namespace treevar::csv
