#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include "stella/optim.hpp"

namespace stella {

enum class InitKind { nonzero, zero, pseudo_zero, svd_major, svd_minor };

inline std::string to_string(InitKind k) {
  switch (k) {
    case InitKind::nonzero: return "nonzero";
    case InitKind::zero: return "zero";
    case InitKind::pseudo_zero: return "pseudo_zero";
    case InitKind::svd_major: return "svd_major";
    case InitKind::svd_minor: return "svd_minor";
  }
  return "?";
}

inline InitKind init_kind_from_string(const std::string& s) {
  if (s == "nonzero") return InitKind::nonzero;
  if (s == "zero") return InitKind::zero;
  if (s == "pseudo_zero") return InitKind::pseudo_zero;
  if (s == "svd_major") return InitKind::svd_major;
  if (s == "svd_minor") return InitKind::svd_minor;
  throw ContractError("unknown init strategy: " + s);
}

struct InitStrategy {
  InitKind kind = InitKind::nonzero;
  std::uint64_t seed = 0;
};

// The three-factor adapter W + (alpha/r) U S V^T with U, V on Stiefel
// manifolds and S unconstrained. W stays frozen; only the factors train.
struct ThreeFactorAdapter {
  Matrix w;        // m x n, frozen
  StiefelPoint u;  // m x r
  Matrix s;        // r x r
  StiefelPoint v;  // n x r
  double alpha;
  long r;
  std::optional<GradScale> grad_scale;
  InitStrategy init;

  double gamma() const { return alpha / static_cast<double>(r); }
  Eigen::Index m() const { return w.rows(); }
  Eigen::Index n() const { return w.cols(); }
};

// The classic two-factor baseline W + (alpha/r) B A^T, no constraints.
struct TwoFactorAdapter {
  Matrix w;
  Matrix b;  // m x r
  Matrix a;  // n x r
  double alpha;
  long r;
};

inline ThreeFactorAdapter init_adapter(const Matrix& w, long r, double alpha,
                                       const InitStrategy& strategy) {
  const Eigen::Index m = w.rows(), n = w.cols();
  if (r < 1 || r > std::min(m, n)) {
    throw ContractError("init_adapter: rank " + std::to_string(r) + " out of range for " +
                        std::to_string(m) + "x" + std::to_string(n) + " weight");
  }
  if (alpha <= 0) throw ContractError("init_adapter: alpha must be positive");

  Matrix u_init, v_init, s_init = Matrix::Identity(r, r);
  Matrix base = w;

  switch (strategy.kind) {
    case InitKind::nonzero:
      u_init = random_orthonormal(m, r, strategy.seed);
      v_init = random_orthonormal(n, r, strategy.seed + 1);
      break;
    case InitKind::zero:
      u_init = random_orthonormal(m, r, strategy.seed);
      v_init = random_orthonormal(n, r, strategy.seed + 1);
      s_init.setZero();
      break;
    case InitKind::pseudo_zero:
      u_init = random_orthonormal(m, r, strategy.seed);
      v_init = random_orthonormal(n, r, strategy.seed + 1);
      base -= (alpha / r) * u_init * s_init * v_init.transpose();
      break;
    case InitKind::svd_major:
    case InitKind::svd_minor: {
      SvdResult svd = thin_svd(w);
      if (svd.sigma(r - 1) <= rank_tolerance(svd.sigma(0), m, n)) {
        throw ContractError("init_adapter: weight has fewer than r nonzero singular values");
      }
      if (strategy.kind == InitKind::svd_major) {
        u_init = svd.u.leftCols(r);
        v_init = svd.v.leftCols(r);
      } else {
        u_init = svd.u.rightCols(r);
        v_init = svd.v.rightCols(r);
      }
      break;
    }
  }

  return ThreeFactorAdapter{std::move(base), StiefelPoint(std::move(u_init)), std::move(s_init),
                            StiefelPoint(std::move(v_init)), alpha, r, std::nullopt, strategy};
}

inline Matrix merge(const ThreeFactorAdapter& ad) {
  return ad.w + ad.gamma() * ad.u.y() * ad.s * ad.v.y().transpose();
}

inline Matrix merge(const TwoFactorAdapter& ad) {
  return ad.w + (ad.alpha / ad.r) * ad.b * ad.a.transpose();
}

// (W + gamma U S V^T) x, evaluated factor-by-factor.
inline Matrix forward(const ThreeFactorAdapter& ad, const Matrix& x) {
  if (x.rows() != ad.n()) throw ContractError("forward: input row count mismatch");
  return ad.w * x + ad.gamma() * (ad.u.y() * (ad.s * (ad.v.y().transpose() * x)));
}

inline Matrix forward(const TwoFactorAdapter& ad, const Matrix& x) {
  if (x.rows() != ad.w.cols()) throw ContractError("forward: input row count mismatch");
  return ad.w * x + (ad.alpha / ad.r) * (ad.b * (ad.a.transpose() * x));
}

struct FactorGrads {
  Matrix g_u;  // m x r
  Matrix g_s;  // r x r
  Matrix g_v;  // n x r
};

// Chain rule through W~ = W + gamma U S V^T for g_tilde = dL/dW~:
//   g_U = gamma g~ V S^T,  g_S = gamma U^T g~ V,  g_V = gamma g~^T U S.
inline FactorGrads factor_grads(const ThreeFactorAdapter& ad, const Matrix& g_tilde) {
  if (g_tilde.rows() != ad.m() || g_tilde.cols() != ad.n()) {
    throw ContractError("factor_grads: gradient shape mismatch");
  }
  const double g = ad.gamma();
  const Matrix gv = g_tilde * ad.v.y();
  return {g * gv * ad.s.transpose(), g * ad.u.y().transpose() * gv,
          g * g_tilde.transpose() * ad.u.y() * ad.s};
}

inline long param_count(const ThreeFactorAdapter& ad) {
  return ad.r * (ad.m() + ad.n()) + ad.r * ad.r;
}

inline long param_count(const TwoFactorAdapter& ad) {
  return ad.r * (ad.w.rows() + ad.w.cols());
}

// Checkpoint directory: w.mat, u.mat, s.mat, v.mat plus a `meta` key-value
// file holding alpha, r, strategy, seed.
inline void save_checkpoint(const ThreeFactorAdapter& ad, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_matrix(dir / "w.mat", ad.w);
  write_matrix(dir / "u.mat", ad.u.y());
  write_matrix(dir / "s.mat", ad.s);
  write_matrix(dir / "v.mat", ad.v.y());
  std::ofstream meta(dir / "meta");
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", ad.alpha);
  meta << "alpha = " << buf << "\n"
       << "r = " << ad.r << "\n"
       << "strategy = " << to_string(ad.init.kind) << "\n"
       << "seed = " << ad.init.seed << "\n";
}

inline ThreeFactorAdapter load_checkpoint(const std::filesystem::path& dir) {
  Matrix w = read_matrix(dir / "w.mat");
  Matrix u = read_matrix(dir / "u.mat");
  Matrix s = read_matrix(dir / "s.mat");
  Matrix v = read_matrix(dir / "v.mat");

  std::ifstream meta(dir / "meta");
  if (!meta) throw ContractError("load_checkpoint: missing meta file in " + dir.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(meta, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string t) {
      const auto b = t.find_first_not_of(" \t");
      const auto e = t.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : t.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  for (const char* key : {"alpha", "r", "strategy", "seed"}) {
    if (!kv.count(key)) throw ContractError(std::string("load_checkpoint: meta missing key ") + key);
  }
  InitStrategy init{init_kind_from_string(kv["strategy"]),
                    static_cast<std::uint64_t>(std::stoull(kv["seed"]))};
  return ThreeFactorAdapter{std::move(w), StiefelPoint(std::move(u)), std::move(s),
                            StiefelPoint(std::move(v)), std::stod(kv["alpha"]),
                            std::stol(kv["r"]), std::nullopt, init};
}

}  // namespace stella
