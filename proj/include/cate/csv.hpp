#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "cate/data_model.hpp"
#include "cate/error.hpp"

namespace cate {

// ============================================================================
// Number formatting. Machine outputs carry 10 significant digits; human
// tables carry 3 decimals. snprintf with the C numeric locale keeps the bytes
// identical across runs and platforms.
// ============================================================================

inline std::string fmt_sig10(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

inline std::string fmt_fixed3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

// ============================================================================
// Observed-sample CSV: header "z,d,y,<covariate names...>", one unit per row,
// no quoting. z/d/y must be exactly 0 or 1; covariates must be finite
// decimals. Errors carry 1-based line and column positions.
// ============================================================================

struct CsvData {
  ObservedSample obs;
  std::vector<std::string> covariate_names;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

inline double parse_double_field(const std::string& field, std::size_t line,
                                 std::size_t col) {
  double v = 0.0;
  const char* first = field.data();
  const char* last = field.data() + field.size();
  const auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc{} || res.ptr != last || field.empty())
    throw Error(ErrorKind::ParseError, "line " + std::to_string(line) + ", column " +
                                           std::to_string(col) +
                                           ": not a decimal number: '" + field + "'");
  return v;
}

}  // namespace detail

inline CsvData parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line))
    throw Error(ErrorKind::ParseError, "empty input: missing header row");
  const std::vector<std::string> header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "z" || header[1] != "d" || header[2] != "y")
    throw Error(ErrorKind::MissingColumn, "header must start with z,d,y");

  CsvData data;
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (header[c].empty())
      throw Error(ErrorKind::MissingColumn,
                  "covariate column " + std::to_string(c + 1) + " has no name");
    data.covariate_names.push_back(header[c]);
  }
  const std::size_t ncols = header.size();
  const std::size_t p = ncols - 3;

  std::vector<double> z, d, y;
  std::vector<double> xflat;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != ncols)
      throw Error(ErrorKind::ParseError,
                  "line " + std::to_string(lineno) + ": expected " +
                      std::to_string(ncols) + " fields, found " +
                      std::to_string(fields.size()));
    for (std::size_t c = 0; c < 3; ++c) {
      const double v = detail::parse_double_field(fields[c], lineno, c + 1);
      if (v != 0.0 && v != 1.0)
        throw Error(ErrorKind::NonBinaryValue,
                    "line " + std::to_string(lineno) + ", column " +
                        std::to_string(c + 1) + ": " + header[c] +
                        " must be 0 or 1");
      (c == 0 ? z : c == 1 ? d : y).push_back(v);
    }
    for (std::size_t c = 3; c < ncols; ++c) {
      const double v = detail::parse_double_field(fields[c], lineno, c + 1);
      if (!std::isfinite(v))
        throw Error(ErrorKind::NonFiniteInput,
                    "line " + std::to_string(lineno) + ", column " +
                        std::to_string(c + 1) + ": covariate must be finite");
      xflat.push_back(v);
    }
  }

  const std::size_t n = z.size();
  data.obs.z = Eigen::Map<Eigen::VectorXd>(z.data(), static_cast<Eigen::Index>(n));
  data.obs.d = Eigen::Map<Eigen::VectorXd>(d.data(), static_cast<Eigen::Index>(n));
  data.obs.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(n));
  data.obs.x.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      data.obs.x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          xflat[i * p + j];
  return data;
}

inline CsvData load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoError, "cannot open input file: " + path);
  return parse_csv(in);
}

inline void write_observed_csv(const std::string& path, const ObservedSample& obs,
                               const std::vector<std::string>& covariate_names) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::IoError, "cannot open output file: " + path);
  out << "z,d,y";
  for (const auto& name : covariate_names) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < obs.z.size(); ++i) {
    out << fmt_sig10(obs.z(i)) << ',' << fmt_sig10(obs.d(i)) << ','
        << fmt_sig10(obs.y(i));
    for (Eigen::Index j = 0; j < obs.x.cols(); ++j)
      out << ',' << fmt_sig10(obs.x(i, j));
    out << '\n';
  }
}

}  // namespace cate
