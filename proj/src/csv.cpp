#include "spreaddiv/csv.hpp"

#include <cstdio>
#include <cstdlib>
#include <stdexcept>

namespace spreaddiv {

std::string fmt17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

CsvMatrix read_csv_matrix(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_csv_matrix: cannot open " + path);
  CsvMatrix out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::size_t cols = 0;
    const char* p = line.c_str();
    while (*p) {
      char* end = nullptr;
      const double v = std::strtod(p, &end);
      if (end == p) throw std::runtime_error("read_csv_matrix: bad number in " + path);
      out.values.push_back(v);
      ++cols;
      p = end;
      while (*p == ',' || *p == ' ' || *p == '\t' || *p == '\r') ++p;
    }
    if (out.rows == 0)
      out.cols = cols;
    else if (cols != out.cols)
      throw std::runtime_error("read_csv_matrix: ragged rows in " + path);
    ++out.rows;
  }
  if (out.rows == 0) throw std::runtime_error("read_csv_matrix: empty file " + path);
  return out;
}

void CsvWriter::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size())
    throw std::invalid_argument("CsvWriter: row width does not match header");
  rows_.push_back(std::move(cells));
}

std::string CsvWriter::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i) out += ',';
    out += header_[i];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

void CsvWriter::write_file(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("CsvWriter: cannot open " + path);
  f << to_string();
  if (!f) throw std::runtime_error("CsvWriter: write failed for " + path);
}

}  // namespace spreaddiv
