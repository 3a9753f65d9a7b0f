#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

namespace dechist::io {

// All numeric text output goes through these: %.17g round-trips doubles
// exactly, which is what makes rerun artifacts byte-comparable.
std::string format_double(double x);

// Plain-text complex matrix format:
//   line 1: "rows cols"
//   then one row per line, entries as "re,im" separated by single spaces.
std::string matrix_to_text(const Eigen::MatrixXcd& m);
Eigen::MatrixXcd matrix_from_text(const std::string& text);

// Minimal CSV writer: header row then data rows, no quoting (callers must
// not put commas in cells), trailing newline.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  void add_row(const std::vector<std::string>& cells);
  const std::string& str() const { return buf_; }
  void write(const std::string& path) const;

 private:
  std::size_t width_;
  std::string buf_;
};

std::string cell(double x);
std::string cell(int x);
std::string cell(std::size_t x);
std::string cell(const std::string& s);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace dechist::io
