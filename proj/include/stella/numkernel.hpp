#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <utility>
#include <vector>

#include "stella/errors.hpp"
#include "stella/matrix_io.hpp"

namespace stella {

// ||A^T A - I||_F, the column-orthonormality defect.
inline double orthonormality_error(const Matrix& a) {
  const Eigen::Index k = a.cols();
  return (a.transpose() * a - Matrix::Identity(k, k)).norm();
}

struct SvdResult {
  Matrix u;      // m x k, orthonormal columns
  Vector sigma;  // k, non-negative, non-increasing
  Matrix v;      // n x k, orthonormal columns
};

// Relative tolerance below which a matrix is treated as rank deficient.
inline double rank_tolerance(double sigma_max, Eigen::Index m, Eigen::Index k) {
  return 1e-12 * sigma_max * static_cast<double>(std::max(m, k));
}

inline SvdResult thin_svd(const Matrix& a) {
  require_finite(a, "thin_svd");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) {
    throw NumericalError("thin_svd: solver failed to converge on " +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " matrix");
  }
  return {svd.matrixU(), svd.singularValues(), svd.matrixV()};
}

// Orthonormal factor of the polar decomposition, u*v^T from the thin SVD.
// Errors out at rank deficiency: the factor is non-unique there and a silent
// completion would corrupt downstream retractions.
inline Matrix polar_factor(const Matrix& a) {
  if (a.rows() < a.cols()) {
    throw ContractError("polar_factor: need rows >= cols, got " +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  SvdResult svd = thin_svd(a);
  const double smin = svd.sigma(svd.sigma.size() - 1);
  if (smin <= rank_tolerance(svd.sigma(0), a.rows(), a.cols())) {
    throw NumericalError("polar_factor: rank-deficient input (" +
                         std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                         ", sigma_min=" + std::to_string(smin) + ")");
  }
  return svd.u * svd.v.transpose();
}

// Per-element polar factors of a uniformly shaped stack. Elements are
// independent, so the batch is split across hardware threads; the result does
// not depend on the degree of parallelism.
inline std::vector<Matrix> batched_polar_factor(const std::vector<Matrix>& stack) {
  if (stack.empty()) return {};
  const Eigen::Index m = stack.front().rows(), k = stack.front().cols();
  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (stack[i].rows() != m || stack[i].cols() != k) {
      throw ContractError("batched_polar_factor: shape mismatch at index " + std::to_string(i));
    }
  }
  std::vector<Matrix> out(stack.size());
  std::vector<std::string> errors(stack.size());

  auto worker = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        out[i] = polar_factor(stack[i]);
      } catch (const std::exception& e) {
        errors[i] = e.what();
      }
    }
  };

  const std::size_t n_threads =
      std::min<std::size_t>(stack.size(), std::max(1u, std::thread::hardware_concurrency()));
  if (n_threads <= 1) {
    worker(0, stack.size());
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (stack.size() + n_threads - 1) / n_threads;
    for (std::size_t t = 0; t < n_threads; ++t) {
      const std::size_t b = t * chunk;
      if (b >= stack.size()) break;
      pool.emplace_back(worker, b, std::min(b + chunk, stack.size()));
    }
    for (auto& th : pool) th.join();
  }

  for (std::size_t i = 0; i < stack.size(); ++i) {
    if (!errors[i].empty()) {
      throw NumericalError("batched_polar_factor: element " + std::to_string(i) +
                           " failed: " + errors[i]);
    }
  }
  return out;
}

// Scaling-and-squaring with a Taylor core: exp(a) = exp(a/2^s)^(2^s).
inline Matrix matrix_exp(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw ContractError("matrix_exp: matrix must be square, got " +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  require_finite(a, "matrix_exp");
  const Eigen::Index k = a.rows();
  const double norm = a.cwiseAbs().rowwise().sum().maxCoeff();  // inf-norm
  int s = 0;
  if (norm > 0.5) s = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
  Matrix x = a / std::pow(2.0, s);

  Matrix result = Matrix::Identity(k, k);
  Matrix term = Matrix::Identity(k, k);
  for (int i = 1; i <= 40; ++i) {
    term = (term * x) / static_cast<double>(i);
    result += term;
    if (term.norm() < 1e-17 * result.norm()) break;
  }
  for (int i = 0; i < s; ++i) result = result * result;
  return result;
}

// Thin QR with the sign of each diagonal entry of r forced non-negative, so
// downstream uses (exponential-map retraction, seeded generators) are
// deterministic.
inline std::pair<Matrix, Matrix> thin_qr(const Matrix& a) {
  if (a.rows() < a.cols()) {
    throw ContractError("thin_qr: need rows >= cols, got " +
                        std::to_string(a.rows()) + "x" + std::to_string(a.cols()));
  }
  require_finite(a, "thin_qr");
  const Eigen::Index k = a.cols();
  Eigen::HouseholderQR<Matrix> qr(a);
  Matrix q = qr.householderQ() * Matrix::Identity(a.rows(), k);
  Matrix r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  for (Eigen::Index j = 0; j < k; ++j) {
    if (r(j, j) < 0) {
      r.row(j) = -r.row(j);
      q.col(j) = -q.col(j);
    }
  }
  return {std::move(q), std::move(r)};
}

inline Matrix gaussian_matrix(Eigen::Index m, Eigen::Index k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(m, k);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < k; ++j) g(i, j) = gauss(rng);
  return g;
}

// Q-factor of a standard Gaussian matrix: a random column-orthonormal matrix,
// deterministic per seed.
inline Matrix random_orthonormal(Eigen::Index m, Eigen::Index k, std::uint64_t seed) {
  if (m < k || k < 1) {
    throw ContractError("random_orthonormal: need m >= k >= 1, got m=" +
                        std::to_string(m) + " k=" + std::to_string(k));
  }
  return thin_qr(gaussian_matrix(m, k, seed)).first;
}

}  // namespace stella
