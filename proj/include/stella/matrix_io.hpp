#pragma once

#include <Eigen/Dense>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stella/errors.hpp"

namespace stella {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline void require_finite(const Matrix& a, const std::string& what) {
  if (!a.allFinite()) {
    throw NumericalError(what + ": matrix contains NaN/Inf (" +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + ")");
  }
}

// Text format: first line "<rows> <cols>", then one line per row with
// whitespace-separated decimals printed at 17 significant digits.
inline void write_matrix(std::ostream& os, const Matrix& a) {
  os << a.rows() << " " << a.cols() << "\n";
  char buf[40];
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", a(i, j));
      os << (j ? " " : "") << buf;
    }
    os << "\n";
  }
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& a) {
  std::ofstream os(path);
  if (!os) throw ContractError("cannot open for writing: " + path.string());
  write_matrix(os, a);
}

inline Matrix read_matrix(std::istream& is, const std::string& origin = "<stream>") {
  Eigen::Index rows = 0, cols = 0;
  if (!(is >> rows >> cols) || rows <= 0 || cols <= 0) {
    throw ContractError(origin + ": bad matrix header (expected '<rows> <cols>')");
  }
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      if (!(is >> a(i, j))) {
        throw ContractError(origin + ": truncated matrix body at entry (" +
                            std::to_string(i) + "," + std::to_string(j) + ")");
      }
    }
  }
  require_finite(a, origin);
  return a;
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ContractError("cannot open for reading: " + path.string());
  return read_matrix(is, path.string());
}

}  // namespace stella
