// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/solvers.hpp"

#include <cmath>
#include <string>

#include "bgl/errors.hpp"

namespace bgl {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_finite_state(const TrainState& state, int64_t step, const char* phase) {
  if (!all_finite(state.omega) || !all_finite(state.theta)) {
    throw NumericError(std::string(phase) + " diverged at step " + std::to_string(step) +
                       ": non-finite parameters");
  }
}

struct Momentum {
  double beta = 0.0;
  ParameterVector velocity;
  bool active = false;

  explicit Momentum(double b, const ParameterVector& like) : beta(b) {
    if (beta > 0.0) {
      velocity = like.zeros_like();
      active = true;
    }
  }

  // Returns the update direction for gradient `g`.
  const std::vector<double>& direction(const std::vector<double>& g) {
    if (!active) return g;
    std::vector<double> flat = velocity.flatten();
    for (size_t i = 0; i < flat.size(); ++i) flat[i] = beta * flat[i] + g[i];
    velocity = velocity.unflatten(flat);
    buffer_ = std::move(flat);
    return buffer_;
  }

 private:
  std::vector<double> buffer_;
};

void axpy_into(ParameterVector& pv, double alpha, const std::vector<double>& dir) {
  std::vector<double> flat = pv.flatten();
  if (flat.size() != dir.size()) throw ShapeError("update direction length mismatch");
  for (size_t i = 0; i < flat.size(); ++i) flat[i] += alpha * dir[i];
  pv = pv.unflatten(flat);
}

double norm_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

void emit_step(const StepCallback& on_step, const TrainState& state, int64_t step, double lr_u,
               double lr_l, const HypergradientReport& rep) {
  if (!on_step) return;
  StepInfo info;
  info.step = step;
  info.lr_upper = lr_u;
  info.lr_lower = lr_l;
  info.upper_value = rep.upper_value;
  info.lower_value = rep.lower_value;
  info.hyper_norm = rep.total_norm();
  info.direct_norm = rep.direct_norm();
  info.coupling_norm = rep.coupling_norm();
  info.lower_grad_norm = rep.lower_grad_norm;
  info.degenerate = rep.degenerate_coupling;
  info.counters = state.counters;
  on_step(info);
}

}  // namespace

double lr_schedule(int64_t step, int64_t total, double init, double final_value) {
  if (total <= 0) return init;
  if (step < 0) step = 0;
  if (step > total) step = total;
  const double c = std::cos(kPi * static_cast<double>(step) / static_cast<double>(total));
  return final_value + 0.5 * (init - final_value) * (1.0 + c);
}

double lr_at(int64_t step, int64_t total, double init, double final_value, LrDecay decay) {
  switch (decay) {
    case LrDecay::Constant:
      return init;
    case LrDecay::Linear: {
      if (total <= 0) return init;
      if (step < 0) step = 0;
      if (step > total) step = total;
      const double f = static_cast<double>(step) / static_cast<double>(total);
      return init + (final_value - init) * f;
    }
    case LrDecay::Cosine:
      break;
  }
  return lr_schedule(step, total, init, final_value);
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Naive:
      return "naive";
    case Strategy::Tbgl:
      return "tbgl";
    case Strategy::Ibgl:
      break;
  }
  return "ibgl";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "naive") return Strategy::Naive;
  if (name == "tbgl") return Strategy::Tbgl;
  if (name == "ibgl") return Strategy::Ibgl;
  throw ConfigError("unknown strategy '" + name + "' (expected naive, tbgl or ibgl)");
}

void SolverConfig::validate() const {
  if (warm_steps < 0) throw ConfigError("warm_steps must be >= 0");
  if (outer_steps < 0) throw ConfigError("outer_steps must be >= 0");
  if (k < 1) throw ConfigError("k must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (warm_steps > 0 && warm_lr <= 0.0) throw ConfigError("warm_lr must be > 0");
  if (upper_lr_init <= 0.0 || upper_lr_final <= 0.0) throw ConfigError("upper lr must be > 0");
  if (lower_lr_init <= 0.0 || lower_lr_final <= 0.0) throw ConfigError("lower lr must be > 0");
  if (upper_lr_final > upper_lr_init) throw ConfigError("upper_lr_final must be <= upper_lr_init");
  if (lower_lr_final > lower_lr_init) throw ConfigError("lower_lr_final must be <= lower_lr_init");
  if (momentum < 0.0 || momentum >= 1.0) throw ConfigError("momentum must be in [0, 1)");
}

TrainState init_state(const BilevelProblem& problem) {
  TrainState state;
  state.omega = problem.omega_init();
  state.theta = problem.theta_init();
  return state;
}

TrainState warm_start(BilevelProblem& problem, const SolverConfig& cfg) {
  cfg.validate();
  TrainState state = init_state(problem);
  for (int64_t i = 0; i < cfg.warm_steps; ++i) {
    problem.draw_batches(cfg.seed, state.tick++);
    GradEval ev = eval_loss_grad(problem, LossKind::Lower, state.omega, state.theta,
                                 WrtBlocks::Both, &state.counters);
    axpy_into(state.omega, -cfg.warm_lr, ev.omega_grad->flatten());
    axpy_into(state.theta, -cfg.warm_lr, ev.theta_grad->flatten());
    state.lower_history.push_back(ev.value);
    check_finite_state(state, i, "warm start");
  }
  return state;
}

void tbgl_solve(BilevelProblem& problem, TrainState& state, const SolverConfig& cfg,
                const StepCallback& on_step) {
  cfg.validate();
  if (cfg.k != 1) throw ConfigError("one-step strategy requires k == 1");
  Momentum mom(cfg.momentum, state.omega);
  for (int64_t step = 0; step < cfg.outer_steps; ++step) {
    problem.draw_batches(cfg.seed, state.tick++);
    const double lr_u = lr_at(step, cfg.outer_steps, cfg.upper_lr_init, cfg.upper_lr_final,
                              cfg.decay);
    const double lr_l = lr_at(step, cfg.outer_steps, cfg.lower_lr_init, cfg.lower_lr_final,
                              cfg.decay);
    EstimatorConfig est = cfg.estimator;
    est.eta = lr_l;
    HypergradientReport rep = tbgl_hypergradient(problem, state.omega, state.theta, est,
                                                 state.counters);
    state.theta = *rep.theta_next;
    axpy_into(state.omega, -lr_u, mom.direction(rep.total));
    state.counters.outer_updates += 1;
    state.lower_history.push_back(rep.lower_value);
    check_finite_state(state, step, "one-step outer loop");
    emit_step(on_step, state, step, lr_u, lr_l, rep);
  }
}

void ibgl_solve(BilevelProblem& problem, TrainState& state, const SolverConfig& cfg,
                const StepCallback& on_step) {
  cfg.validate();
  Momentum mom(cfg.momentum, state.omega);
  for (int64_t step = 0; step < cfg.outer_steps; ++step) {
    problem.draw_batches(cfg.seed, state.tick++);
    const double lr_u = lr_at(step, cfg.outer_steps, cfg.upper_lr_init, cfg.upper_lr_final,
                              cfg.decay);
    const double lr_l = lr_at(step, cfg.outer_steps, cfg.lower_lr_init, cfg.lower_lr_final,
                              cfg.decay);
    for (int64_t j = 0; j < cfg.k; ++j) {
      LowerStepResult ls = lower_step(problem, state.omega, state.theta, lr_l, state.counters);
      state.theta = ls.theta_next;
    }
    HypergradientReport rep = ibgl_hypergradient(problem, state.omega, state.theta,
                                                 cfg.estimator, state.counters);
    axpy_into(state.omega, -lr_u, mom.direction(rep.total));
    state.counters.outer_updates += 1;
    state.lower_history.push_back(rep.lower_value);
    check_finite_state(state, step, "stationary outer loop");
    emit_step(on_step, state, step, lr_u, lr_l, rep);
  }
}

void naive_joint_solve(BilevelProblem& problem, TrainState& state, const SolverConfig& cfg,
                       const StepCallback& on_step) {
  cfg.validate();
  Momentum mom(cfg.momentum, state.omega);
  for (int64_t step = 0; step < cfg.outer_steps; ++step) {
    problem.draw_batches(cfg.seed, state.tick++);
    const double lr_u = lr_at(step, cfg.outer_steps, cfg.upper_lr_init, cfg.upper_lr_final,
                              cfg.decay);
    const double lr_l = lr_at(step, cfg.outer_steps, cfg.lower_lr_init, cfg.lower_lr_final,
                              cfg.decay);
    GradEval ev = eval_loss_grad(problem, LossKind::Lower, state.omega, state.theta,
                                 WrtBlocks::Both, &state.counters);
    std::vector<double> gw = ev.omega_grad->flatten();
    axpy_into(state.omega, -lr_u, mom.direction(gw));
    axpy_into(state.theta, -lr_l, ev.theta_grad->flatten());
    state.counters.outer_updates += 1;
    state.lower_history.push_back(ev.value);
    check_finite_state(state, step, "joint baseline");
    if (on_step) {
      StepInfo info;
      info.step = step;
      info.lr_upper = lr_u;
      info.lr_lower = lr_l;
      info.lower_value = ev.value;
      info.lower_grad_norm = norm_of(ev.theta_grad->flatten());
      info.counters = state.counters;
      on_step(info);
    }
  }
}

void solve(BilevelProblem& problem, TrainState& state, const SolverConfig& cfg,
           const StepCallback& on_step) {
  switch (cfg.strategy) {
    case Strategy::Naive:
      naive_joint_solve(problem, state, cfg, on_step);
      return;
    case Strategy::Tbgl:
      tbgl_solve(problem, state, cfg, on_step);
      return;
    case Strategy::Ibgl:
      ibgl_solve(problem, state, cfg, on_step);
      return;
  }
}

}  // namespace bgl
