#pragma once

#include "stella/config.hpp"
#include "stella/gradcheck.hpp"

namespace stella {

namespace detail {

// Deterministic well-conditioned target for procrustes (m x rank, singular
// values in [0.6, 1.4]).
inline Matrix make_procrustes_target(long m, long r, std::uint64_t seed) {
  const Matrix u = random_orthonormal(m, r, seed + 101);
  const Matrix v = random_orthonormal(r, r, seed + 202);
  Vector sigma(r);
  for (long i = 0; i < r; ++i) {
    sigma(i) = r == 1 ? 1.0 : 0.6 + 0.8 * static_cast<double>(i) / static_cast<double>(r - 1);
  }
  return u * sigma.asDiagonal() * v.transpose();
}

}  // namespace detail

// Execute a validated run configuration: creates out_dir, writes history.csv,
// config.resolved and the task-specific artifacts. Fully deterministic per
// seed. An existing out_dir is refused unless force is set.
inline void run(RunConfig cfg, bool stability_grid = false) {
  validate_config(cfg);
  if (cfg.out_dir.empty()) throw ContractError("run: 'out' directory required");
  const std::filesystem::path out = cfg.out_dir;
  if (std::filesystem::exists(out) && !cfg.force) {
    throw ContractError("run: output directory exists, refusing to overwrite without --force: " +
                        out.string());
  }
  std::filesystem::create_directories(out);

  cfg.init.seed = cfg.task.seed;
  cfg.task.grad_scale_d = cfg.grad_scale_d;

  {
    std::ofstream os(out / "config.resolved");
    write_resolved_config(os, cfg);
  }

  switch (cfg.task.kind) {
    case TaskKind::procrustes: {
      TaskSpec spec = cfg.task;
      spec.target = cfg.target_path.empty()
                        ? detail::make_procrustes_target(spec.m, spec.r, spec.seed)
                        : read_matrix(cfg.target_path);
      ProcrustesResult res = run_procrustes(spec, cfg.rule, cfg.retraction, cfg.lr_schedule);
      write_history(out / "history.csv", res.history);
      write_matrix(out / "target.mat", *spec.target);
      write_matrix(out / "y_final.mat", res.final.y());
      break;
    }
    case TaskKind::lowrank_recover: {
      TaskSpec spec = cfg.task;
      spec.target = cfg.target_path.empty() ? gaussian_matrix(spec.m, spec.n, spec.seed + 7)
                                            : read_matrix(cfg.target_path);
      LowrankResult res =
          run_lowrank_recover(spec, cfg.rule, cfg.retraction, cfg.init, cfg.lr_schedule);
      write_history(out / "history.csv", res.history);
      write_matrix(out / "target.mat", *spec.target);
      save_checkpoint(res.adapter, out / "adapter");
      break;
    }
    case TaskKind::classify: {
      ClassifyResult res = run_classify(cfg.task, cfg.rule, cfg.retraction, cfg.geometry,
                                        cfg.init, cfg.lr_schedule);
      write_history(out / "history.csv", res.history);
      write_matrix(out / "merged.mat", res.merged);
      char buf[40];
      std::snprintf(buf, sizeof(buf), "%.17g", res.accuracy);
      std::ofstream metrics(out / "metrics");
      metrics << "accuracy = " << buf << "\n";
      break;
    }
    case TaskKind::stability: {
      std::ofstream os(out / "stability.csv");
      os << "m,n,r,gamma,forward_moment,backward_moment\n";
      char buf[40];
      auto emit = [&](long m, long n, long r, double gamma, const StabilityResult& sr) {
        os << m << ',' << n << ',' << r << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", gamma);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", sr.forward_moment);
        os << buf << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", sr.backward_moment);
        os << buf << '\n';
      };
      if (stability_grid) {
        for (long m : {64L, 128L, 256L}) {
          for (long r : {4L, 8L, 16L}) {
            const double gamma = std::sqrt(static_cast<double>(m) / static_cast<double>(r));
            emit(m, m, r, gamma,
                 run_stability_mc(m, m, r, gamma, cfg.trials, cfg.task.seed));
          }
        }
      } else {
        const double gamma = cfg.effective_gamma();
        emit(cfg.task.m, cfg.task.n, cfg.task.r, gamma,
             run_stability_mc(cfg.task.m, cfg.task.n, cfg.task.r, gamma, cfg.trials,
                              cfg.task.seed));
      }
      write_history(out / "history.csv", {});
      break;
    }
  }
}

}  // namespace stella
