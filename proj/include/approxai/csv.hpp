#pragma once
// Plain numeric CSV: one matrix row per line, comma separated, optional
// header line of non-numeric labels. Values are written with 17 significant
// digits so they read back exactly.

#include <cmath>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "approxai/error.hpp"
#include "approxai/matrix.hpp"

namespace approxai {

namespace detail {

inline bool parse_double(const std::string& cell, double& out) {
  const char* begin = cell.c_str();
  while (*begin == ' ' || *begin == '\t') ++begin;
  char* end = nullptr;
  out = std::strtod(begin, &end);
  if (end == begin) return false;
  while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
  return *end == '\0';
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

/// Reads a rectangular numeric CSV. A first line that fails to parse as
/// numbers is treated as a header and skipped.
[[nodiscard]] inline Matrix<double> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::parse_error, "cannot open '" + path + "'");
  std::vector<double> data;
  std::size_t cols = 0, rows = 0, line_no = 0;
  std::string line;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      if (!detail::parse_double(cell, v)) {
        numeric = false;
        break;
      }
      if (!std::isfinite(v)) {
        throw Error(Errc::parse_error, path + ":" + std::to_string(line_no) + ": non-finite value");
      }
      row.push_back(v);
    }
    if (!numeric) {
      if (rows == 0 && data.empty() && line_no == 1) continue;
      throw Error(Errc::parse_error, path + ":" + std::to_string(line_no) + ": non-numeric cell '" + cell + "'");
    }
    if (rows == 0) cols = row.size();
    if (row.size() != cols) {
      throw Error(Errc::parse_error, path + ":" + std::to_string(line_no) + ": expected " +
                                         std::to_string(cols) + " columns, found " +
                                         std::to_string(row.size()));
    }
    data.insert(data.end(), row.begin(), row.end());
    ++rows;
  }
  if (rows == 0) throw Error(Errc::parse_error, path + ": no numeric rows");
  return Matrix<double>(rows, cols, std::move(data));
}

/// A vector stored either as one row or as one column.
[[nodiscard]] inline std::vector<double> read_csv_vector(const std::string& path) {
  Matrix<double> m = read_csv(path);
  if (m.rows() != 1 && m.cols() != 1) {
    throw Error(Errc::parse_error, path + ": expected a single row or column, got " +
                                       std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  return m.data();
}

[[nodiscard]] inline std::string csv_text(const Matrix<double>& m, const std::string& header = {}) {
  std::string out;
  if (!header.empty()) out += header + "\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (c) out += ",";
      out += detail::format_double(m(r, c));
    }
    out += "\n";
  }
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::invalid_argument, "cannot write '" + path + "'");
  out << text;
}

inline void write_csv(const std::string& path, const Matrix<double>& m, const std::string& header = {}) {
  write_text(path, csv_text(m, header));
}

}  // namespace approxai
