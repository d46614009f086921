#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace spreaddiv {

/// Locale-independent numeric formatting: '.' decimal separator, 17
/// significant digits, enough to round-trip any double.
std::string fmt17(double v);

/// Headerless numeric CSV -> row-major values; every row must have the same
/// width. Returns (rows, cols, values).
struct CsvMatrix {
  std::size_t rows = 0, cols = 0;
  std::vector<double> values;
};
CsvMatrix read_csv_matrix(const std::string& path);

/// Minimal CSV emitter with a fixed header; numeric cells go through fmt17.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

  void add_row(std::vector<std::string> cells);
  std::string to_string() const;
  void write_file(const std::string& path) const;

  const std::vector<std::string>& header() const { return header_; }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

}  // namespace spreaddiv
