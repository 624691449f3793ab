#pragma once

#include "stella/tasks.hpp"

namespace stella {

// Finite-difference check of the closed-form factor gradients, on the
// quadratic loss L = ||W~ X - T||_F^2. Central differences at step h; the
// reported relative error is normalized by the largest analytic gradient
// entry of the instance.
inline double factor_grad_fd_error(const ThreeFactorAdapter& ad, const Matrix& x, const Matrix& t,
                                   double h = 1e-6) {
  auto loss_of = [&](const Matrix& u, const Matrix& s, const Matrix& v) {
    const Matrix w_tilde = ad.w + (ad.alpha / ad.r) * u * s * v.transpose();
    return (w_tilde * x - t).squaredNorm();
  };

  const Matrix residual = merge(ad) * x - t;
  const Matrix g_tilde = 2.0 * residual * x.transpose();
  const FactorGrads analytic = factor_grads(ad, g_tilde);

  const double scale = std::max({analytic.g_u.cwiseAbs().maxCoeff(),
                                 analytic.g_s.cwiseAbs().maxCoeff(),
                                 analytic.g_v.cwiseAbs().maxCoeff(), 1e-8});

  double max_rel = 0;
  auto check = [&](const Matrix& a, const Matrix& base, int which) {
    Matrix u = ad.u.y(), s = ad.s, v = ad.v.y();
    for (Eigen::Index i = 0; i < base.rows(); ++i) {
      for (Eigen::Index j = 0; j < base.cols(); ++j) {
        Matrix* target = which == 0 ? &u : which == 1 ? &s : &v;
        const double saved = (*target)(i, j);
        (*target)(i, j) = saved + h;
        const double lp = loss_of(u, s, v);
        (*target)(i, j) = saved - h;
        const double lm = loss_of(u, s, v);
        (*target)(i, j) = saved;
        const double fd = (lp - lm) / (2 * h);
        max_rel = std::max(max_rel, std::abs(a(i, j) - fd) / scale);
      }
    }
  };
  check(analytic.g_u, ad.u.y(), 0);
  check(analytic.g_s, ad.s, 1);
  check(analytic.g_v, ad.v.y(), 2);
  return max_rel;
}

// Random small instance for gradient checking, deterministic per seed.
inline double gradcheck_random_instance(std::uint64_t seed, double h = 1e-6) {
  std::mt19937_64 rng(seed);
  const long m = 4 + static_cast<long>(rng() % 13);  // 4..16
  const long n = 4 + static_cast<long>(rng() % 13);
  const long r = 1 + static_cast<long>(rng() % std::min<long>(4, std::min(m, n)));
  const long batch = 1 + static_cast<long>(rng() % 5);

  const Matrix w = gaussian_matrix(m, n, rng());
  ThreeFactorAdapter ad = init_adapter(w, r, 2.0 * r, InitStrategy{InitKind::nonzero, rng()});
  ad.s = gaussian_matrix(r, r, rng());
  const Matrix x = gaussian_matrix(n, batch, rng());
  const Matrix t = gaussian_matrix(m, batch, rng());
  return factor_grad_fd_error(ad, x, t, h);
}

}  // namespace stella
