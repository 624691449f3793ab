#pragma once

#include <cstdint>

#include "stella/numkernel.hpp"

namespace stella {

// St(k, n): n x k matrices with orthonormal columns.
//
// Membership is checked at 1e-8 on construction; retractions produce points
// well inside that (tested at 1e-10), the looser constructor tolerance
// absorbs drift between re-retractions.
inline constexpr double kMembershipTol = 1e-8;

inline bool is_on_manifold(const Matrix& y, double tol) {
  if (y.rows() < y.cols()) {
    throw ContractError("is_on_manifold: need n >= k");
  }
  return orthonormality_error(y) <= tol;
}

class StiefelPoint {
public:
  explicit StiefelPoint(Matrix y) : y_(std::move(y)) {
    require_finite(y_, "StiefelPoint");
    const double err = orthonormality_error(y_);
    if (err > kMembershipTol) {
      throw ContractError("StiefelPoint: ||Y^T Y - I||_F = " + std::to_string(err) +
                          " exceeds membership tolerance");
    }
  }

  const Matrix& y() const { return y_; }
  Eigen::Index rows() const { return y_.rows(); }
  Eigen::Index cols() const { return y_.cols(); }

private:
  Matrix y_;
};

// A tangent vector carries its base point so base-mismatch bugs surface as
// contract errors instead of silent geometry corruption.
class TangentVector {
public:
  TangentVector(StiefelPoint base, Matrix delta)
      : base_(std::move(base)), delta_(std::move(delta)) {
    if (delta_.rows() != base_.rows() || delta_.cols() != base_.cols()) {
      throw ContractError("TangentVector: delta shape does not match base point");
    }
    const Matrix yd = base_.y().transpose() * delta_;
    const double resid = (yd + yd.transpose()).norm();
    if (resid > kMembershipTol * std::max(1.0, delta_.norm())) {
      throw ContractError("TangentVector: tangency residual " + std::to_string(resid) +
                          " exceeds tolerance");
    }
  }

  const StiefelPoint& base() const { return base_; }
  const Matrix& delta() const { return delta_; }

private:
  StiefelPoint base_;
  Matrix delta_;
};

inline void require_same_base(const TangentVector& a, const TangentVector& b) {
  if (a.base().y().rows() != b.base().y().rows() ||
      a.base().y().cols() != b.base().y().cols() ||
      (a.base().y() - b.base().y()).norm() != 0.0) {
    throw ContractError("tangent vectors have different base points");
  }
}

// Canonical metric: g_Y(D1, D2) = tr(D1^T (I - 1/2 Y Y^T) D2).
inline double canonical_metric(const StiefelPoint& p, const TangentVector& d1,
                               const TangentVector& d2) {
  require_same_base(d1, d2);
  if ((d1.base().y() - p.y()).norm() != 0.0) {
    throw ContractError("canonical_metric: tangent vectors not based at p");
  }
  const Matrix& y = p.y();
  const Matrix yd2 = y.transpose() * d2.delta();
  return d1.delta().cwiseProduct(d2.delta()).sum() -
         0.5 * (y.transpose() * d1.delta()).cwiseProduct(yd2).sum();
}

// grad = egrad - Y egrad^T Y, the Riemannian gradient under the canonical
// metric.
inline TangentVector euclidean_to_riemannian_grad(const StiefelPoint& p, const Matrix& egrad) {
  if (egrad.rows() != p.rows() || egrad.cols() != p.cols()) {
    throw ContractError("euclidean_to_riemannian_grad: shape mismatch");
  }
  const Matrix& y = p.y();
  return TangentVector(p, egrad - y * egrad.transpose() * y);
}

// pi_Y(D) = D - Y symm(Y^T D), the orthogonal projection onto the tangent
// space. Distinct from the gradient conversion above; both are exposed.
inline TangentVector project_to_tangent(const StiefelPoint& p, const Matrix& d) {
  if (d.rows() != p.rows() || d.cols() != p.cols()) {
    throw ContractError("project_to_tangent: shape mismatch");
  }
  const Matrix& y = p.y();
  const Matrix yd = y.transpose() * d;
  return TangentVector(p, d - y * (0.5 * (yd + yd.transpose())));
}

// Polar retraction: the orthonormal factor of Y + Delta.
inline StiefelPoint retract_polar(const StiefelPoint& p, const TangentVector& d) {
  return StiefelPoint(polar_factor(p.y() + d.delta()));
}

// Exponential map (canonical-metric geodesic):
//   exp_Y(D) = Y M + Q N, with QR = D - Y Y^T D and
//   (M; N) = expm([[Y^T D, -R^T], [R, 0]]) (I; 0).
inline StiefelPoint retract_exp(const StiefelPoint& p, const TangentVector& d) {
  const Matrix& y = p.y();
  const Eigen::Index k = y.cols();
  const Matrix a = y.transpose() * d.delta();           // k x k, skew for tangent d
  auto [q, r] = thin_qr(d.delta() - y * (y.transpose() * d.delta()));

  Matrix block(2 * k, 2 * k);
  block.topLeftCorner(k, k) = a;
  block.topRightCorner(k, k) = -r.transpose();
  block.bottomLeftCorner(k, k) = r;
  block.bottomRightCorner(k, k).setZero();

  const Matrix e = matrix_exp(block);
  const Matrix m = e.topLeftCorner(k, k);
  const Matrix n = e.bottomLeftCorner(k, k);
  // Re-orthonormalize through the polar factor: the matrix exponential is
  // accurate to ~1e-14 but thousands of steps accumulate.
  return StiefelPoint(polar_factor(y * m + q * n));
}

// Unit-Frobenius-norm random tangent vector, deterministic per seed.
inline TangentVector random_tangent(const StiefelPoint& p, std::uint64_t seed) {
  const Matrix g = gaussian_matrix(p.rows(), p.cols(), seed);
  TangentVector t = project_to_tangent(p, g);
  const double norm = t.delta().norm();
  if (norm == 0.0) {
    throw NumericalError("random_tangent: degenerate zero projection");
  }
  return TangentVector(p, t.delta() / norm);
}

}  // namespace stella
