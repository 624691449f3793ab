#pragma once

#include <algorithm>
#include <numeric>
#include <sstream>
#include <vector>

#include "stella/adapter.hpp"

namespace stella {

enum class TaskKind { procrustes, lowrank_recover, classify, stability };

inline std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::procrustes: return "procrustes";
    case TaskKind::lowrank_recover: return "lowrank";
    case TaskKind::classify: return "classify";
    case TaskKind::stability: return "stability";
  }
  return "?";
}

enum class Geometry { stiefel, euclidean };

inline std::string to_string(Geometry g) {
  return g == Geometry::stiefel ? "stiefel" : "euclidean";
}

struct TaskSpec {
  TaskKind kind = TaskKind::procrustes;
  long m = 32, n = 32, r = 4, batch = 0;
  std::uint64_t seed = 0;
  long steps = 1000;
  double alpha = 0;  // <= 0 means alpha = r
  std::optional<Matrix> target;
  std::string dataset_path;
  long classes = 0;  // 0 = infer from data
  std::optional<long> grad_scale_d;

  double effective_alpha() const { return alpha > 0 ? alpha : static_cast<double>(r); }
};

struct RunRecord {
  long step = 0;
  double loss = 0;
  double orth_err_u = 0;
  double orth_err_v = 0;
  double grad_norm_u = 0;
  double grad_norm_s = 0;
  double grad_norm_v = 0;
};

inline void write_history(std::ostream& os, const std::vector<RunRecord>& history) {
  os << "step,loss,orth_err_u,orth_err_v,grad_norm_u,grad_norm_s,grad_norm_v\n";
  char buf[40];
  auto put = [&](double x) {
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    os << ',' << buf;
  };
  for (const RunRecord& rec : history) {
    os << rec.step;
    put(rec.loss);
    put(rec.orth_err_u);
    put(rec.orth_err_v);
    put(rec.grad_norm_u);
    put(rec.grad_norm_s);
    put(rec.grad_norm_v);
    os << '\n';
  }
}

inline void write_history(const std::filesystem::path& path, const std::vector<RunRecord>& history) {
  std::ofstream os(path);
  if (!os) throw ContractError("cannot open for writing: " + path.string());
  write_history(os, history);
}

// Loss blew past the divergence threshold; the partial history is attached
// for diagnosis.
class DivergenceError : public NumericalError {
public:
  DivergenceError(const std::string& what, std::vector<RunRecord> history)
      : NumericalError(what), history_(std::move(history)) {}
  const std::vector<RunRecord>& history() const { return history_; }

private:
  std::vector<RunRecord> history_;
};

inline constexpr double kDivergenceThreshold = 1e6;

// ---------------------------------------------------------------------------
// Procrustes: min_{Y in St(r, m)} ||Y - M||_F^2, optimum uf(M).
// ---------------------------------------------------------------------------

struct ProcrustesResult {
  StiefelPoint final;
  std::vector<RunRecord> history;
};

inline ProcrustesResult run_procrustes(const TaskSpec& spec, const StepRule& rule,
                                       Retraction retraction,
                                       LrSchedule schedule = LrSchedule::constant) {
  if (!spec.target) throw ContractError("run_procrustes: target matrix required");
  const Matrix& m = *spec.target;
  StiefelPoint y(random_orthonormal(m.rows(), m.cols(), spec.seed));
  OptimizerState state;
  std::vector<RunRecord> history;
  history.reserve(spec.steps);

  for (long t = 0; t < spec.steps; ++t) {
    const Matrix diff = y.y() - m;
    const double loss = diff.squaredNorm();
    const Matrix egrad = 2.0 * diff;
    const Matrix rgrad = euclidean_to_riemannian_grad(y, egrad).delta();
    history.push_back({t, loss, orthonormality_error(y.y()), 0.0, rgrad.norm(), 0.0, 0.0});
    if (loss > kDivergenceThreshold) {
      throw DivergenceError("run_procrustes: diverged at step " + std::to_string(t),
                            std::move(history));
    }
    StepRule rule_t = rule;
    rule_t.learning_rate = rule.learning_rate * schedule_factor(schedule, t, spec.steps);
    y = riemannian_step(rule_t, state, y, egrad, std::nullopt, retraction);
  }
  return {std::move(y), std::move(history)};
}

// ---------------------------------------------------------------------------
// Shared three-factor training step. The same pipeline serves the stiefel and
// euclidean geometries; only the per-factor update call differs.
// ---------------------------------------------------------------------------

class ThreeFactorTrainer {
public:
  ThreeFactorTrainer(ThreeFactorAdapter adapter, Geometry geometry, StepRule rule,
                     Retraction retraction, LrSchedule schedule, long total_steps)
      : w_(std::move(adapter.w)),
        u_(adapter.u.y()),
        s_(std::move(adapter.s)),
        v_(adapter.v.y()),
        gamma_(adapter.gamma()),
        grad_scale_(adapter.grad_scale),
        geometry_(geometry),
        rule_(rule),
        retraction_(retraction),
        schedule_(schedule),
        total_steps_(total_steps) {}

  const Matrix& u() const { return u_; }
  const Matrix& s() const { return s_; }
  const Matrix& v() const { return v_; }
  const Matrix& w() const { return w_; }
  double gamma() const { return gamma_; }

  Matrix delta() const { return gamma_ * u_ * s_ * v_.transpose(); }
  Matrix adapted() const { return w_ + delta(); }

  // One optimization step from dL/dW~; returns the pre-step metrics row.
  RunRecord step(long t, double loss, const Matrix& g_tilde) {
    const Matrix gv = g_tilde * v_;
    const Matrix g_u = gamma_ * gv * s_.transpose();
    const Matrix g_s = gamma_ * u_.transpose() * gv;
    const Matrix g_v = gamma_ * g_tilde.transpose() * u_ * s_;

    RunRecord rec{t,          loss,         orthonormality_error(u_), orthonormality_error(v_),
                  g_u.norm(), g_s.norm(),   g_v.norm()};

    StepRule rule_t = rule_;
    rule_t.learning_rate = rule_.learning_rate * schedule_factor(schedule_, t, total_steps_);

    if (geometry_ == Geometry::stiefel) {
      u_ = riemannian_step(rule_t, state_u_, StiefelPoint(u_), g_u, grad_scale_, retraction_).y();
      v_ = riemannian_step(rule_t, state_v_, StiefelPoint(v_), g_v, grad_scale_, retraction_).y();
    } else {
      u_ = euclidean_step(rule_t, state_u_, u_, g_u);
      v_ = euclidean_step(rule_t, state_v_, v_, g_v);
    }
    s_ = euclidean_step(rule_t, state_s_, s_, g_s);
    return rec;
  }

private:
  Matrix w_, u_, s_, v_;
  double gamma_;
  std::optional<GradScale> grad_scale_;
  Geometry geometry_;
  StepRule rule_;
  Retraction retraction_;
  LrSchedule schedule_;
  long total_steps_;
  OptimizerState state_u_, state_s_, state_v_;
};

// ---------------------------------------------------------------------------
// Low-rank recovery: min ||gamma U S V^T - T||_F^2. By the best rank-r
// approximation property the optimal value is the tail singular energy
// sum_{i>r} sigma_i(T)^2.
// ---------------------------------------------------------------------------

struct LowrankResult {
  ThreeFactorAdapter adapter;
  std::vector<RunRecord> history;
};

inline LowrankResult run_lowrank_recover(const TaskSpec& spec, const StepRule& rule,
                                         Retraction retraction, const InitStrategy& strategy,
                                         LrSchedule schedule = LrSchedule::constant) {
  if (!spec.target) throw ContractError("run_lowrank_recover: target matrix required");
  const Matrix& target = *spec.target;
  const double alpha = spec.effective_alpha();

  ThreeFactorAdapter adapter = init_adapter(target, spec.r, alpha, strategy);
  if (spec.grad_scale_d) {
    adapter.grad_scale = GradScale{*spec.grad_scale_d, target.rows(), target.cols()};
  }
  adapter.w.setZero();  // the objective trains the adapter delta against T
  ThreeFactorTrainer trainer(adapter, Geometry::stiefel, rule, retraction, schedule, spec.steps);

  std::vector<RunRecord> history;
  history.reserve(spec.steps);
  for (long t = 0; t < spec.steps; ++t) {
    const Matrix diff = trainer.delta() - target;
    const double loss = diff.squaredNorm();
    if (loss > kDivergenceThreshold) {
      throw DivergenceError("run_lowrank_recover: diverged at step " + std::to_string(t),
                            std::move(history));
    }
    history.push_back(trainer.step(t, loss, 2.0 * diff));
  }

  ThreeFactorAdapter out{Matrix::Zero(target.rows(), target.cols()),
                         StiefelPoint(trainer.u()),
                         trainer.s(),
                         StiefelPoint(trainer.v()),
                         alpha,
                         spec.r,
                         adapter.grad_scale,
                         strategy};
  return {std::move(out), std::move(history)};
}

// ---------------------------------------------------------------------------
// Classification: softmax regression through a frozen random weight plus a
// trainable adapter, on a CSV feature/label dataset.
// ---------------------------------------------------------------------------

struct Dataset {
  Matrix x;                  // features x samples
  std::vector<long> labels;  // 0..classes-1
  long classes = 0;
};

inline Dataset read_dataset_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ContractError("cannot open dataset: " + path.string());

  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };

  std::string line;
  if (!std::getline(is, line)) throw ContractError(path.string() + ": empty dataset");
  auto header = split(line);
  long label_col = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    std::string h = header[i];
    while (!h.empty() && (h.back() == '\r' || h.back() == ' ')) h.pop_back();
    if (h == "label") label_col = static_cast<long>(i);
  }
  if (label_col < 0) throw ContractError(path.string() + ": no column named 'label'");
  const long n_features = static_cast<long>(header.size()) - 1;
  if (n_features < 1) throw ContractError(path.string() + ": no feature columns");

  std::vector<std::vector<double>> rows;
  std::vector<long> labels;
  long line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto cells = split(line);
    if (static_cast<long>(cells.size()) != n_features + 1) {
      throw ContractError(path.string() + ":" + std::to_string(line_no) +
                          ": expected " + std::to_string(n_features + 1) + " cells, got " +
                          std::to_string(cells.size()));
    }
    std::vector<double> feats;
    feats.reserve(n_features);
    long label = -1;
    for (long i = 0; i < static_cast<long>(cells.size()); ++i) {
      try {
        if (i == label_col) {
          std::size_t pos = 0;
          label = std::stol(cells[i], &pos);
          if (label < 0) throw std::invalid_argument("negative");
        } else {
          std::size_t pos = 0;
          double x = std::stod(cells[i], &pos);
          if (!std::isfinite(x)) throw std::invalid_argument("non-finite");
          feats.push_back(x);
        }
      } catch (const std::exception&) {
        throw ContractError(path.string() + ":" + std::to_string(line_no) +
                            ": malformed cell '" + cells[i] + "'");
      }
    }
    rows.push_back(std::move(feats));
    labels.push_back(label);
  }
  if (rows.empty()) throw ContractError(path.string() + ": dataset has no rows");

  Dataset ds;
  ds.x = Matrix(n_features, static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j)
    for (long i = 0; i < n_features; ++i) ds.x(i, static_cast<Eigen::Index>(j)) = rows[j][i];
  ds.labels = std::move(labels);
  ds.classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  return ds;
}

struct ClassifyResult {
  double accuracy = 0;
  std::vector<RunRecord> history;
  Matrix merged;  // classes x features
};

inline ClassifyResult run_classify(const TaskSpec& spec, const StepRule& rule,
                                   Retraction retraction, Geometry geometry,
                                   const InitStrategy& strategy = {},
                                   LrSchedule schedule = LrSchedule::constant) {
  Dataset ds = read_dataset_csv(spec.dataset_path);
  if (spec.classes > 0 && spec.classes != ds.classes) {
    throw ContractError("run_classify: dataset has " + std::to_string(ds.classes) +
                        " classes, config says " + std::to_string(spec.classes));
  }
  const long c = ds.classes;
  const long f = ds.x.rows();
  const long n_total = static_cast<long>(ds.labels.size());

  // Deterministic 80/20 split by seeded shuffle.
  std::vector<long> idx(n_total);
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(spec.seed ^ 0x51177eeULL);
  std::shuffle(idx.begin(), idx.end(), rng);
  const long n_train = std::max<long>(1, (n_total * 8) / 10);

  Matrix x_train(f, n_train), x_test(f, n_total - n_train);
  std::vector<long> y_train(n_train), y_test(n_total - n_train);
  for (long j = 0; j < n_total; ++j) {
    if (j < n_train) {
      x_train.col(j) = ds.x.col(idx[j]);
      y_train[j] = ds.labels[idx[j]];
    } else {
      x_test.col(j - n_train) = ds.x.col(idx[j]);
      y_test[j - n_train] = ds.labels[idx[j]];
    }
  }

  // Frozen base weight, scaled like a standard dense init.
  const Matrix w = gaussian_matrix(c, f, spec.seed + 17) / std::sqrt(static_cast<double>(f));
  ThreeFactorAdapter adapter = init_adapter(w, spec.r, spec.effective_alpha(), strategy);
  if (spec.grad_scale_d) adapter.grad_scale = GradScale{*spec.grad_scale_d, c, f};
  ThreeFactorTrainer trainer(adapter, geometry, rule, retraction, schedule, spec.steps);

  auto softmax_cols = [](Matrix logits) {
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      Vector col = logits.col(j);
      const double mx = col.maxCoeff();
      col = (col.array() - mx).exp();
      logits.col(j) = col / col.sum();
    }
    return logits;
  };

  std::vector<RunRecord> history;
  history.reserve(spec.steps);
  for (long t = 0; t < spec.steps; ++t) {
    const Matrix logits = trainer.adapted() * x_train;
    Matrix probs = softmax_cols(logits);
    double loss = 0;
    for (long j = 0; j < n_train; ++j) loss -= std::log(std::max(probs(y_train[j], j), 1e-300));
    loss /= static_cast<double>(n_train);
    if (loss > kDivergenceThreshold) {
      throw DivergenceError("run_classify: diverged at step " + std::to_string(t),
                            std::move(history));
    }
    for (long j = 0; j < n_train; ++j) probs(y_train[j], j) -= 1.0;
    const Matrix g_tilde = probs * x_train.transpose() / static_cast<double>(n_train);
    history.push_back(trainer.step(t, loss, g_tilde));
  }

  const Matrix merged = trainer.adapted();
  long correct = 0;
  const Matrix test_logits = merged * x_test;
  for (Eigen::Index j = 0; j < test_logits.cols(); ++j) {
    Eigen::Index argmax = 0;
    test_logits.col(j).maxCoeff(&argmax);
    if (argmax == y_test[j]) ++correct;
  }
  const double acc =
      y_test.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(y_test.size());
  return {acc, std::move(history), merged};
}

// ---------------------------------------------------------------------------
// Scale-stability Monte Carlo: with fresh random orthonormal U, V and S = I,
// the adapter output y = gamma U V^T x has E[y_i^2] = gamma^2 r / m, and the
// input gradient g = gamma V U^T v has E[g_i^2] = gamma^2 r / n, for inputs
// with unit second moment.
// ---------------------------------------------------------------------------

struct StabilityResult {
  double forward_moment = 0;
  double backward_moment = 0;
};

inline StabilityResult run_stability_mc(long m, long n, long r, double gamma, long trials,
                                        std::uint64_t seed) {
  if (m < r || n < r || r < 1) throw ContractError("run_stability_mc: bad dimensions");
  if (trials < 1) throw ContractError("run_stability_mc: trials must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double fwd_sum = 0, bwd_sum = 0;
  for (long t = 0; t < trials; ++t) {
    const Matrix u = random_orthonormal(m, r, rng());
    const Matrix v = random_orthonormal(n, r, rng());
    Vector x(n), g_out(m);
    for (long i = 0; i < n; ++i) x(i) = gauss(rng);
    for (long i = 0; i < m; ++i) g_out(i) = gauss(rng);
    const Vector y = gamma * (u * (v.transpose() * x));
    const Vector g_in = gamma * (v * (u.transpose() * g_out));
    fwd_sum += y.squaredNorm() / static_cast<double>(m);
    bwd_sum += g_in.squaredNorm() / static_cast<double>(n);
  }
  return {fwd_sum / static_cast<double>(trials), bwd_sum / static_cast<double>(trials)};
}

}  // namespace stella
