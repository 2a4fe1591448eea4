#include "treevar/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace treevar::csv {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

Table parse(const std::string& text) {
  Table t;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      if (fields.size() != t.header.size()) {
        throw std::runtime_error("csv: row has " + std::to_string(fields.size()) +
                                 " fields, header has " + std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(fields));
    }
  }
  if (first) throw std::runtime_error("csv: empty input");
  return t;
}

Table read_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("csv: cannot open " + path);
  std::ostringstream buf;
  buf << f.rdbuf();
  return parse(buf.str());
}

void write_file(const std::string& path, const Table& table) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("csv: cannot write " + path);
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (i) f << ',';
    f << table.header[i];
  }
  f << '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) f << ',';
      f << row[i];
    }
    f << '\n';
  }
  if (!f) throw std::runtime_error("csv: write failed for " + path);
}

double to_double(const std::string& field, const std::string& context) {
  double v = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc{} || ptr != end) {
    throw std::runtime_error("csv: bad numeric field '" + field + "' in " + context);
  }
  return v;
}

}  // namespace treevar::csv
