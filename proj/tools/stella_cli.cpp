// Experiment CLI: geometric low-rank adapter training runs and checks.

#include <CLI11.hpp>
#include <iostream>

#include "stella/runner.hpp"

namespace {

struct FlagValues {
  std::string config;
  std::map<std::string, std::string> raw;  // config-key -> value, flags only
  bool force = false;
  bool grid = false;
};

// Shared flags; each stores its value as a config key string so file and
// flag settings resolve through the same path (flags win).
void add_shared_flags(CLI::App* cmd, FlagValues& fv) {
  cmd->add_option("--config", fv.config, "Run configuration file (flat key = value)");
  auto bind = [cmd, &fv](const std::string& flag, const std::string& key,
                         const std::string& help) {
    cmd->add_option_function<std::string>(
           flag, [&fv, key](const std::string& v) { fv.raw[key] = v; }, help)
        ->expected(1);
  };
  bind("--seed", "seed", "Random seed");
  bind("--steps", "steps", "Number of optimization steps");
  bind("--lr", "lr", "Base learning rate");
  bind("--rank", "rank", "Adapter rank r");
  bind("--alpha", "alpha", "Adapter scale alpha");
  bind("--optimizer", "optimizer", "sgd | sgd_momentum | adam | adamw");
  bind("--geometry", "geometry", "stiefel | euclidean");
  bind("--retraction", "retraction", "polar | exp");
  bind("--init", "init", "nonzero | zero | pseudo_zero | svd_major | svd_minor");
  bind("--grad-scale-d", "grad_scale_d", "Gradient scaling reference dimension d");
  bind("--lr-schedule", "lr_schedule", "constant | linear | cosine");
  bind("--m", "m", "Row dimension");
  bind("--n", "n", "Column dimension");
  bind("--batch", "batch", "Batch size");
  bind("--out", "out", "Output directory");
  bind("--dataset", "dataset", "Dataset CSV path (classify)");
  bind("--target", "target", "Target matrix file (procrustes / lowrank)");
  bind("--classes", "classes", "Expected label cardinality (classify)");
  bind("--gamma", "gamma", "Scaling coefficient (stability)");
  bind("--trials", "trials", "Monte Carlo trials (stability)");
  cmd->add_flag("--force", fv.force, "Overwrite an existing output directory");
}

stella::RunConfig resolve(const FlagValues& fv, stella::TaskKind kind) {
  stella::RunConfig cfg;
  if (!fv.config.empty()) cfg = stella::parse_config(fv.config);
  for (const auto& [key, value] : fv.raw) stella::apply_config_key(cfg, key, value);
  cfg.task.kind = kind;
  cfg.force = fv.force;
  return cfg;
}

int run_checked(const FlagValues& fv, stella::TaskKind kind) {
  stella::run(resolve(fv, kind), fv.grid);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"StelLA: Stiefel-manifold low-rank adaptation experiments"};
  app.require_subcommand(1);

  FlagValues fv_procrustes, fv_lowrank, fv_classify, fv_stability;
  auto* procrustes =
      app.add_subcommand("procrustes", "Fit Y on St(r, m) to a target matrix");
  add_shared_flags(procrustes, fv_procrustes);
  auto* lowrank = app.add_subcommand("lowrank", "Recover a low-rank target with the adapter");
  add_shared_flags(lowrank, fv_lowrank);
  auto* classify = app.add_subcommand("classify", "Softmax regression with an adapted weight");
  add_shared_flags(classify, fv_classify);
  auto* stability = app.add_subcommand("stability", "Monte Carlo scale-stability moments");
  add_shared_flags(stability, fv_stability);
  stability->add_flag("--grid", fv_stability.grid, "Run the (m, r) grid instead of one tuple");

  std::uint64_t cg_seed = 0;
  auto* check_grad =
      app.add_subcommand("check-grad", "Closed-form factor gradients vs finite differences");
  check_grad->add_option("--seed", cg_seed, "Base seed for the random instances");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*check_grad) {
      double max_err = 0;
      for (int i = 0; i < 20; ++i) {
        max_err = std::max(max_err, stella::gradcheck_random_instance(cg_seed + i));
      }
      std::printf("max relative error: %.3e\n", max_err);
      return max_err > 1e-4 ? 1 : 0;
    }
    if (*procrustes) return run_checked(fv_procrustes, stella::TaskKind::procrustes);
    if (*lowrank) return run_checked(fv_lowrank, stella::TaskKind::lowrank_recover);
    if (*classify) return run_checked(fv_classify, stella::TaskKind::classify);
    if (*stability) return run_checked(fv_stability, stella::TaskKind::stability);
  } catch (const stella::ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
