#pragma once

#include <map>
#include <set>

#include "stella/tasks.hpp"

namespace stella {

// Flat `key = value` run configuration. `#` starts a comment; unknown and
// duplicate keys are hard errors with line identification. CLI flags override
// file values.
struct RunConfig {
  TaskSpec task;
  StepRule rule;
  Geometry geometry = Geometry::stiefel;
  Retraction retraction = Retraction::polar;
  InitStrategy init;
  std::optional<long> grad_scale_d;
  LrSchedule lr_schedule = LrSchedule::constant;
  std::string out_dir;
  std::string target_path;
  // stability task only
  double gamma = 0;  // <= 0 means sqrt(m/r)
  long trials = 100000;
  bool force = false;

  std::set<std::string> explicit_keys;  // keys set by file or flag

  double effective_gamma() const {
    return gamma > 0 ? gamma
                     : std::sqrt(static_cast<double>(task.m) / static_cast<double>(task.r));
  }
};

namespace detail {

inline const std::set<std::string>& known_config_keys() {
  static const std::set<std::string> keys = {
      "task",      "m",          "n",          "rank",    "batch",      "steps",
      "seed",      "lr",         "alpha",      "optimizer", "geometry", "retraction",
      "init",      "grad_scale_d", "lr_schedule", "out",  "dataset",    "target",
      "classes",   "gamma",      "trials",     "weight_decay", "momentum",
      "beta1",     "beta2",      "epsilon"};
  return keys;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline TaskKind task_kind_from_string(const std::string& s) {
  if (s == "procrustes") return TaskKind::procrustes;
  if (s == "lowrank") return TaskKind::lowrank_recover;
  if (s == "classify") return TaskKind::classify;
  if (s == "stability") return TaskKind::stability;
  throw ContractError("unknown task: " + s);
}

inline RuleKind rule_kind_from_string(const std::string& s) {
  if (s == "sgd") return RuleKind::sgd;
  if (s == "sgd_momentum") return RuleKind::sgd_momentum;
  if (s == "adam") return RuleKind::adam;
  if (s == "adamw") return RuleKind::adamw;
  throw ContractError("unknown optimizer: " + s);
}

inline Geometry geometry_from_string(const std::string& s) {
  if (s == "stiefel") return Geometry::stiefel;
  if (s == "euclidean") return Geometry::euclidean;
  throw ContractError("unknown geometry: " + s);
}

inline Retraction retraction_from_string(const std::string& s) {
  if (s == "polar") return Retraction::polar;
  if (s == "exp") return Retraction::exp;
  throw ContractError("unknown retraction: " + s);
}

inline LrSchedule schedule_from_string(const std::string& s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "linear") return LrSchedule::linear;
  if (s == "cosine") return LrSchedule::cosine;
  throw ContractError("unknown lr_schedule: " + s);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing junk");
    return x;
  } catch (const std::exception&) {
    throw ContractError("key '" + key + "': expected a number, got '" + v + "'");
  }
}

inline long parse_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long x = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing junk");
    return x;
  } catch (const std::exception&) {
    throw ContractError("key '" + key + "': expected an integer, got '" + v + "'");
  }
}

}  // namespace detail

// Apply one key/value pair to the config. Shared between the file parser and
// CLI flag overrides so both surfaces resolve identically.
inline void apply_config_key(RunConfig& cfg, const std::string& key, const std::string& value) {
  using namespace detail;
  if (!known_config_keys().count(key)) {
    throw ContractError("unknown config key '" + key + "'");
  }
  if (key == "task") cfg.task.kind = task_kind_from_string(value);
  else if (key == "m") cfg.task.m = parse_long(key, value);
  else if (key == "n") cfg.task.n = parse_long(key, value);
  else if (key == "rank") cfg.task.r = parse_long(key, value);
  else if (key == "batch") cfg.task.batch = parse_long(key, value);
  else if (key == "steps") cfg.task.steps = parse_long(key, value);
  else if (key == "seed") cfg.task.seed = static_cast<std::uint64_t>(parse_long(key, value));
  else if (key == "lr") cfg.rule.learning_rate = parse_double(key, value);
  else if (key == "alpha") cfg.task.alpha = parse_double(key, value);
  else if (key == "optimizer") cfg.rule.kind = rule_kind_from_string(value);
  else if (key == "geometry") cfg.geometry = geometry_from_string(value);
  else if (key == "retraction") cfg.retraction = retraction_from_string(value);
  else if (key == "init") cfg.init.kind = init_kind_from_string(value);
  else if (key == "grad_scale_d") cfg.grad_scale_d = parse_long(key, value);
  else if (key == "lr_schedule") cfg.lr_schedule = schedule_from_string(value);
  else if (key == "out") cfg.out_dir = value;
  else if (key == "dataset") cfg.task.dataset_path = value;
  else if (key == "target") cfg.target_path = value;
  else if (key == "classes") cfg.task.classes = parse_long(key, value);
  else if (key == "gamma") cfg.gamma = parse_double(key, value);
  else if (key == "trials") cfg.trials = parse_long(key, value);
  else if (key == "weight_decay") cfg.rule.weight_decay = parse_double(key, value);
  else if (key == "momentum") cfg.rule.momentum = parse_double(key, value);
  else if (key == "beta1") cfg.rule.beta1 = parse_double(key, value);
  else if (key == "beta2") cfg.rule.beta2 = parse_double(key, value);
  else if (key == "epsilon") cfg.rule.epsilon = parse_double(key, value);
  cfg.explicit_keys.insert(key);
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ContractError("cannot open config: " + path.string());

  RunConfig cfg;
  std::map<std::string, int> seen;  // key -> first line
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ContractError(path.string() + ":" + std::to_string(line_no) +
                          ": expected 'key = value'");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (auto it = seen.find(key); it != seen.end()) {
      throw ContractError(path.string() + ": duplicate key '" + key + "' at lines " +
                          std::to_string(it->second) + " and " + std::to_string(line_no));
    }
    seen[key] = line_no;
    try {
      apply_config_key(cfg, key, value);
    } catch (const ContractError& e) {
      throw ContractError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

inline void validate_config(const RunConfig& cfg) {
  if (cfg.task.r < 1) throw ContractError("config: rank must be >= 1");
  if (cfg.task.steps < 0) throw ContractError("config: steps must be >= 0");
  if (cfg.rule.learning_rate <= 0) throw ContractError("config: lr must be positive");
  if (cfg.geometry == Geometry::euclidean && cfg.explicit_keys.count("retraction")) {
    throw ContractError("config: geometry=euclidean does not use a retraction; "
                        "remove the explicit 'retraction' setting");
  }
  if (cfg.task.kind == TaskKind::classify && cfg.task.dataset_path.empty()) {
    throw ContractError("config: classify requires 'dataset'");
  }
  if (!cfg.task.dataset_path.empty() && !std::filesystem::exists(cfg.task.dataset_path)) {
    throw ContractError("config: dataset file does not exist: " + cfg.task.dataset_path);
  }
  if (!cfg.target_path.empty() && !std::filesystem::exists(cfg.target_path)) {
    throw ContractError("config: target file does not exist: " + cfg.target_path);
  }
}

// Full effective configuration; parsing this file reproduces the config.
inline void write_resolved_config(std::ostream& os, const RunConfig& cfg) {
  char buf[40];
  auto num = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return std::string(buf);
  };
  os << "task = " << to_string(cfg.task.kind) << "\n";
  os << "m = " << cfg.task.m << "\n";
  os << "n = " << cfg.task.n << "\n";
  os << "rank = " << cfg.task.r << "\n";
  os << "batch = " << cfg.task.batch << "\n";
  os << "steps = " << cfg.task.steps << "\n";
  os << "seed = " << cfg.task.seed << "\n";
  os << "lr = " << num(cfg.rule.learning_rate) << "\n";
  os << "alpha = " << num(cfg.task.effective_alpha()) << "\n";
  os << "optimizer = " << to_string(cfg.rule.kind) << "\n";
  os << "geometry = " << to_string(cfg.geometry) << "\n";
  if (cfg.geometry == Geometry::stiefel) {
    os << "retraction = " << (cfg.retraction == Retraction::polar ? "polar" : "exp") << "\n";
  }
  os << "init = " << to_string(cfg.init.kind) << "\n";
  if (cfg.grad_scale_d) os << "grad_scale_d = " << *cfg.grad_scale_d << "\n";
  os << "lr_schedule = " << to_string(cfg.lr_schedule) << "\n";
  if (!cfg.out_dir.empty()) os << "out = " << cfg.out_dir << "\n";
  if (!cfg.task.dataset_path.empty()) os << "dataset = " << cfg.task.dataset_path << "\n";
  if (!cfg.target_path.empty()) os << "target = " << cfg.target_path << "\n";
  if (cfg.task.classes > 0) os << "classes = " << cfg.task.classes << "\n";
  if (cfg.task.kind == TaskKind::stability) {
    os << "gamma = " << num(cfg.effective_gamma()) << "\n";
    os << "trials = " << cfg.trials << "\n";
  }
  os << "weight_decay = " << num(cfg.rule.weight_decay) << "\n";
  os << "momentum = " << num(cfg.rule.momentum) << "\n";
  os << "beta1 = " << num(cfg.rule.beta1) << "\n";
  os << "beta2 = " << num(cfg.rule.beta2) << "\n";
  os << "epsilon = " << num(cfg.rule.epsilon) << "\n";
}

}  // namespace stella
