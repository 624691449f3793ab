#include <catch2/catch_amalgamated.hpp>

#include "stella/runner.hpp"
#include "test_support.hpp"

using namespace stella;

namespace {

std::filesystem::path write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  os << text;
  return path;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  REQUIRE(is);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config defaults") {
  RunConfig cfg;
  CHECK(cfg.rule.kind == RuleKind::adamw);
  CHECK(cfg.retraction == Retraction::polar);
  CHECK(cfg.geometry == Geometry::stiefel);
  CHECK(cfg.init.kind == InitKind::nonzero);
  CHECK(cfg.rule.beta1 == 0.9);
  CHECK(cfg.rule.beta2 == 0.999);
  CHECK(cfg.rule.epsilon == 1e-8);
  CHECK(cfg.rule.weight_decay == 0.0);
}

TEST_CASE("config file parsing with comments and whitespace") {
  stella::testing::TempDir dir("stella_cfg_parse");
  auto path = write_file(dir.path() / "run.cfg",
                         "# a comment\n"
                         "task = lowrank\n"
                         "  m=16   # trailing comment\n"
                         "n = 12\n"
                         "rank = 3\n"
                         "lr = 0.005\n"
                         "optimizer = adam\n"
                         "init = pseudo_zero\n"
                         "\n");
  RunConfig cfg = parse_config(path);
  CHECK(cfg.task.kind == TaskKind::lowrank_recover);
  CHECK(cfg.task.m == 16);
  CHECK(cfg.task.n == 12);
  CHECK(cfg.task.r == 3);
  CHECK(cfg.rule.learning_rate == 0.005);
  CHECK(cfg.rule.kind == RuleKind::adam);
  CHECK(cfg.init.kind == InitKind::pseudo_zero);
  CHECK(cfg.explicit_keys.count("lr") == 1);
  CHECK(cfg.explicit_keys.count("seed") == 0);
}

TEST_CASE("alpha over rank fixes the adapter scale") {
  RunConfig cfg;
  apply_config_key(cfg, "rank", "32");
  apply_config_key(cfg, "alpha", "64");
  CHECK(cfg.task.effective_alpha() / static_cast<double>(cfg.task.r) == 2.0);
}

TEST_CASE("duplicate keys are rejected with both line numbers") {
  stella::testing::TempDir dir("stella_cfg_dup");
  auto path = write_file(dir.path() / "dup.cfg", "m = 8\nseed = 1\nm = 9\n");
  CHECK_THROWS_WITH(parse_config(path), Catch::Matchers::ContainsSubstring("duplicate key 'm'") &&
                                            Catch::Matchers::ContainsSubstring("1") &&
                                            Catch::Matchers::ContainsSubstring("3"));
}

TEST_CASE("unknown keys are rejected with the line number") {
  stella::testing::TempDir dir("stella_cfg_unknown");
  auto path = write_file(dir.path() / "bad.cfg", "m = 8\nlearning_rate = 0.1\n");
  CHECK_THROWS_WITH(parse_config(path),
                    Catch::Matchers::ContainsSubstring(":2:") &&
                        Catch::Matchers::ContainsSubstring("unknown config key"));
}

TEST_CASE("malformed lines and values are rejected") {
  stella::testing::TempDir dir("stella_cfg_malformed");
  CHECK_THROWS_WITH(parse_config(write_file(dir.path() / "a.cfg", "just words\n")),
                    Catch::Matchers::ContainsSubstring("expected 'key = value'"));
  CHECK_THROWS_WITH(parse_config(write_file(dir.path() / "b.cfg", "steps = soon\n")),
                    Catch::Matchers::ContainsSubstring("expected an integer"));
  CHECK_THROWS_WITH(parse_config(write_file(dir.path() / "c.cfg", "task = warp\n")),
                    Catch::Matchers::ContainsSubstring("unknown task"));
  CHECK_THROWS_AS(parse_config(dir.path() / "missing.cfg"), ContractError);
}

TEST_CASE("euclidean geometry rejects an explicit retraction") {
  RunConfig cfg;
  apply_config_key(cfg, "geometry", "euclidean");
  CHECK_NOTHROW(validate_config(cfg));
  apply_config_key(cfg, "retraction", "polar");
  CHECK_THROWS_WITH(validate_config(cfg), Catch::Matchers::ContainsSubstring("retraction"));
}

TEST_CASE("validation checks referenced files") {
  RunConfig cfg;
  cfg.task.kind = TaskKind::classify;
  CHECK_THROWS_WITH(validate_config(cfg), Catch::Matchers::ContainsSubstring("dataset"));
  cfg.task.dataset_path = "/nonexistent/ds.csv";
  CHECK_THROWS_WITH(validate_config(cfg), Catch::Matchers::ContainsSubstring("does not exist"));

  RunConfig cfg2;
  cfg2.target_path = "/nonexistent/target.mat";
  CHECK_THROWS_WITH(validate_config(cfg2), Catch::Matchers::ContainsSubstring("does not exist"));
}

TEST_CASE("resolved config round-trips through the parser") {
  stella::testing::TempDir dir("stella_cfg_rt");
  RunConfig cfg;
  apply_config_key(cfg, "task", "procrustes");
  apply_config_key(cfg, "m", "24");
  apply_config_key(cfg, "rank", "3");
  apply_config_key(cfg, "lr", "0.0123");
  apply_config_key(cfg, "retraction", "exp");
  apply_config_key(cfg, "lr_schedule", "cosine");

  auto path = dir.path() / "resolved.cfg";
  {
    std::ofstream os(path);
    write_resolved_config(os, cfg);
  }
  RunConfig back = parse_config(path);
  CHECK(back.task.kind == cfg.task.kind);
  CHECK(back.task.m == cfg.task.m);
  CHECK(back.task.r == cfg.task.r);
  CHECK(back.rule.learning_rate == cfg.rule.learning_rate);
  CHECK(back.retraction == Retraction::exp);
  CHECK(back.lr_schedule == LrSchedule::cosine);
  CHECK(back.rule.beta2 == cfg.rule.beta2);
}

TEST_CASE("runs are deterministic: byte-identical history for equal seeds") {
  stella::testing::TempDir dir("stella_run_det");
  RunConfig cfg;
  cfg.task.kind = TaskKind::procrustes;
  cfg.task.m = 16;
  cfg.task.r = 2;
  cfg.task.seed = 77;
  cfg.task.steps = 200;
  cfg.rule.learning_rate = 1e-2;

  cfg.out_dir = (dir.path() / "a").string();
  run(cfg);
  cfg.out_dir = (dir.path() / "b").string();
  run(cfg);
  CHECK(slurp(dir.path() / "a" / "history.csv") == slurp(dir.path() / "b" / "history.csv"));
  CHECK(slurp(dir.path() / "a" / "y_final.mat") == slurp(dir.path() / "b" / "y_final.mat"));

  cfg.task.seed = 78;
  cfg.out_dir = (dir.path() / "c").string();
  run(cfg);
  CHECK(slurp(dir.path() / "a" / "history.csv") != slurp(dir.path() / "c" / "history.csv"));
}

TEST_CASE("existing output directory is refused without force") {
  stella::testing::TempDir dir("stella_run_force");
  RunConfig cfg;
  cfg.task.kind = TaskKind::procrustes;
  cfg.task.m = 8;
  cfg.task.r = 2;
  cfg.task.steps = 10;
  cfg.rule.learning_rate = 1e-2;
  cfg.out_dir = (dir.path() / "out").string();

  run(cfg);
  CHECK_THROWS_WITH(run(cfg), Catch::Matchers::ContainsSubstring("--force"));
  cfg.force = true;
  CHECK_NOTHROW(run(cfg));
}

TEST_CASE("run writes the task artifacts") {
  stella::testing::TempDir dir("stella_run_artifacts");

  RunConfig lowrank;
  lowrank.task.kind = TaskKind::lowrank_recover;
  lowrank.task.m = 8;
  lowrank.task.n = 6;
  lowrank.task.r = 2;
  lowrank.task.steps = 50;
  lowrank.rule.learning_rate = 1e-2;
  lowrank.out_dir = (dir.path() / "lowrank").string();
  run(lowrank);
  CHECK(std::filesystem::exists(dir.path() / "lowrank" / "history.csv"));
  CHECK(std::filesystem::exists(dir.path() / "lowrank" / "target.mat"));
  CHECK(std::filesystem::exists(dir.path() / "lowrank" / "adapter" / "u.mat"));
  CHECK(std::filesystem::exists(dir.path() / "lowrank" / "config.resolved"));
  // the resolved config reparses cleanly
  CHECK_NOTHROW(parse_config(dir.path() / "lowrank" / "config.resolved"));

  RunConfig stab;
  stab.task.kind = TaskKind::stability;
  stab.task.m = 32;
  stab.task.n = 32;
  stab.task.r = 4;
  stab.trials = 500;
  stab.out_dir = (dir.path() / "stab").string();
  run(stab);
  const std::string csv = slurp(dir.path() / "stab" / "stability.csv");
  CHECK(csv.rfind("m,n,r,gamma,forward_moment,backward_moment\n", 0) == 0);
  CHECK(csv.find("32,32,4,") != std::string::npos);
}
