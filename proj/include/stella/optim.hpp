#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>

#include "stella/stiefel.hpp"

namespace stella {

enum class RuleKind { sgd, sgd_momentum, adam, adamw };

inline std::string to_string(RuleKind k) {
  switch (k) {
    case RuleKind::sgd: return "sgd";
    case RuleKind::sgd_momentum: return "sgd_momentum";
    case RuleKind::adam: return "adam";
    case RuleKind::adamw: return "adamw";
  }
  return "?";
}

struct StepRule {
  RuleKind kind = RuleKind::adamw;
  double learning_rate = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

struct OptimizerState {
  long step_count = 0;
  Matrix slot_m;         // Adam first moment
  Matrix slot_v;         // Adam second moment
  Matrix slot_momentum;  // SGD momentum buffer
};

// Tentative Euclidean update. State slots are zero-initialized on first use;
// step_count advances by exactly one per call. Non-finite gradients are
// rejected before any state mutation.
inline Matrix euclidean_step(const StepRule& rule, OptimizerState& state, const Matrix& param,
                             const Matrix& grad) {
  if (grad.rows() != param.rows() || grad.cols() != param.cols()) {
    throw ContractError("euclidean_step: grad/param shape mismatch");
  }
  if (!grad.allFinite()) {
    throw NumericalError("euclidean_step: non-finite gradient");
  }
  if (rule.learning_rate <= 0) {
    throw ContractError("euclidean_step: learning_rate must be positive");
  }

  const double lr = rule.learning_rate;
  state.step_count += 1;
  Matrix out;

  switch (rule.kind) {
    case RuleKind::sgd: {
      out = param - lr * grad;
      if (rule.weight_decay > 0) out -= lr * rule.weight_decay * param;
      break;
    }
    case RuleKind::sgd_momentum: {
      if (state.slot_momentum.size() == 0) state.slot_momentum = Matrix::Zero(param.rows(), param.cols());
      state.slot_momentum = rule.momentum * state.slot_momentum + grad;
      out = param - lr * state.slot_momentum;
      if (rule.weight_decay > 0) out -= lr * rule.weight_decay * param;
      break;
    }
    case RuleKind::adam:
    case RuleKind::adamw: {
      if (state.slot_m.size() == 0) {
        state.slot_m = Matrix::Zero(param.rows(), param.cols());
        state.slot_v = Matrix::Zero(param.rows(), param.cols());
      }
      state.slot_m = rule.beta1 * state.slot_m + (1 - rule.beta1) * grad;
      state.slot_v = rule.beta2 * state.slot_v + (1 - rule.beta2) * grad.cwiseProduct(grad);
      const double bc1 = 1 - std::pow(rule.beta1, static_cast<double>(state.step_count));
      const double bc2 = 1 - std::pow(rule.beta2, static_cast<double>(state.step_count));
      const Matrix m_hat = state.slot_m / bc1;
      const Matrix v_hat = state.slot_v / bc2;
      out = param - lr * (m_hat.array() / (v_hat.array().sqrt() + rule.epsilon)).matrix();
      if (rule.kind == RuleKind::adamw && rule.weight_decay > 0) {
        out -= lr * rule.weight_decay * param;
      }
      break;
    }
  }
  return out;
}

// Gradient scaling reference: gradients of U (m rows) and V (n rows) are
// multiplied by sqrt(d/m) and sqrt(d/n) to equalize learning speed under
// adaptive step rules.
struct GradScale {
  long d = 0;
  long m = 0;
  long n = 0;
};

inline std::pair<double, double> grad_scale_factors(const GradScale& s) {
  if (s.d <= 0 || s.m <= 0 || s.n <= 0) {
    throw ContractError("grad_scale_factors: dimensions must be positive");
  }
  return {std::sqrt(static_cast<double>(s.d) / s.m), std::sqrt(static_cast<double>(s.d) / s.n)};
}

enum class Retraction { polar, exp };

inline StiefelPoint retract(const StiefelPoint& p, const TangentVector& d, Retraction which) {
  return which == Retraction::polar ? retract_polar(p, d) : retract_exp(p, d);
}

// One manifold-constrained step:
//   (a) convert the Euclidean gradient to the Riemannian one,
//   (b) apply the gradient scale, if any,
//   (c) take a tentative Euclidean step with the given rule,
//   (d) read the perturbed update off as tentative - current,
//   (e) project it to the tangent space,
//   (f) retract.
// Any Euclidean rule plugs into (c) unchanged; optimizer state lives in the
// ambient space and is never transported. Weight decay is structurally forced
// to zero here: decoupled decay pulls the point off the manifold between
// retractions.
inline StiefelPoint riemannian_step(const StepRule& rule, OptimizerState& state,
                                    const StiefelPoint& p, const Matrix& egrad,
                                    const std::optional<GradScale>& scale, Retraction retraction) {
  if (!egrad.allFinite()) {
    throw NumericalError("riemannian_step: non-finite gradient");
  }
  StepRule manifold_rule = rule;
  manifold_rule.weight_decay = 0.0;

  Matrix rgrad = euclidean_to_riemannian_grad(p, egrad).delta();
  if (scale) {
    if (p.rows() != scale->m && p.rows() != scale->n) {
      throw ContractError("riemannian_step: GradScale matches neither U nor V row count");
    }
    rgrad *= std::sqrt(static_cast<double>(scale->d) / static_cast<double>(p.rows()));
  }
  const Matrix tentative = euclidean_step(manifold_rule, state, p.y(), rgrad);
  const TangentVector step = project_to_tangent(p, tentative - p.y());
  return retract(p, step, retraction);
}

enum class LrSchedule { constant, linear, cosine };

inline std::string to_string(LrSchedule s) {
  switch (s) {
    case LrSchedule::constant: return "constant";
    case LrSchedule::linear: return "linear";
    case LrSchedule::cosine: return "cosine";
  }
  return "?";
}

// Multiplier on the base learning rate at a given step; linear and cosine
// decay to zero over the run.
inline double schedule_factor(LrSchedule s, long step, long total_steps) {
  if (total_steps <= 0) return 1.0;
  const double t = static_cast<double>(step) / static_cast<double>(total_steps);
  switch (s) {
    case LrSchedule::constant: return 1.0;
    case LrSchedule::linear: return 1.0 - t;
    case LrSchedule::cosine: return 0.5 * (1.0 + std::cos(M_PI * t));
  }
  return 1.0;
}

}  // namespace stella
