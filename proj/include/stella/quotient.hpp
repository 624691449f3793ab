#pragma once

#include "stella/matrix_io.hpp"

namespace stella {

// Tangent triple for the quotient of three-factor representations by the
// simultaneous orthogonal-group symmetry.
struct QuotientTangent {
  Matrix xi_u;  // m x r
  Matrix xi_s;  // r x r
  Matrix xi_v;  // n x r
};

// Preconditioned inner product on quotient tangents:
//   g = tr(S S^T xi_u^T eta_u) + tr(xi_s^T eta_s) + tr(S^T S xi_v^T eta_v).
// Positive definite for full-rank S; degenerates (legally) when S is
// singular. Only this metric is implemented; the associated projection and
// retraction are out of scope.
inline double quotient_metric(const Matrix& s, const QuotientTangent& t1,
                              const QuotientTangent& t2) {
  if (s.rows() != s.cols()) throw ContractError("quotient_metric: S must be square");
  auto same_shape = [](const Matrix& a, const Matrix& b) {
    return a.rows() == b.rows() && a.cols() == b.cols();
  };
  if (!same_shape(t1.xi_u, t2.xi_u) || !same_shape(t1.xi_s, t2.xi_s) ||
      !same_shape(t1.xi_v, t2.xi_v)) {
    throw ContractError("quotient_metric: tangent shape mismatch");
  }
  if (t1.xi_s.rows() != s.rows() || t1.xi_u.cols() != s.rows() || t1.xi_v.cols() != s.rows()) {
    throw ContractError("quotient_metric: tangent shapes inconsistent with S");
  }
  const double term_u = (s * s.transpose() * t1.xi_u.transpose() * t2.xi_u).trace();
  const double term_s = (t1.xi_s.transpose() * t2.xi_s).trace();
  const double term_v = (s.transpose() * s * t1.xi_v.transpose() * t2.xi_v).trace();
  return term_u + term_s + term_v;
}

}  // namespace stella
