// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/estimators.hpp"

#include <algorithm>
#include <cmath>

namespace bgl {

namespace {

void check_config(const EstimatorConfig& cfg) {
  if (!(cfg.eta > 0.0)) throw ShapeError("estimator eta must be positive");
  if (!(cfg.fd_scale > 0.0)) throw ShapeError("estimator fd_scale must be positive");
  if (!(cfg.guard_eps >= 0.0)) throw ShapeError("estimator guard_eps must be non-negative");
}

std::vector<double> combine(const std::vector<double>& direct, const std::vector<double>& coupling) {
  std::vector<double> total(direct.size());
  for (size_t i = 0; i < direct.size(); ++i) total[i] = direct[i] + coupling[i];
  return total;
}

}  // namespace

LowerStepResult lower_step(const BilevelProblem& problem, const ParameterVector& omega,
                           const ParameterVector& theta, double lr, EvalCounter& counter) {
  if (!(lr > 0.0)) throw ShapeError("lower_step lr must be positive");
  GradEval g = eval_loss_grad(problem, LossKind::Lower, omega, theta, WrtBlocks::ThetaOnly,
                              &counter);
  LowerStepResult out;
  out.theta_next = add_scaled(theta, -lr, *g.theta_grad);
  out.grad_norm = norm(*g.theta_grad);
  out.loss_value = g.value;
  counter.lower_updates += 1;
  return out;
}

HypergradientReport tbgl_hypergradient(const BilevelProblem& problem,
                                       const ParameterVector& omega,
                                       const ParameterVector& theta, const EstimatorConfig& cfg,
                                       EvalCounter& counter) {
  check_config(cfg);
  EvalCounter local;

  LowerStepResult step = lower_step(problem, omega, theta, cfg.eta, local);

  // One backward at (omega, theta') yields both the direct term and v.
  GradEval up = eval_loss_grad(problem, LossKind::Upper, omega, step.theta_next, WrtBlocks::Both,
                               &local);
  const ParameterVector& v = *up.theta_grad;
  const double v_norm = norm(v);
  const double delta = cfg.fd_absolute ? cfg.fd_scale : cfg.fd_scale / std::max(v_norm, 1e-12);

  // Probes are centred at the pre-step theta. With v = 0 both probes coincide
  // and the difference quotient is exactly zero, so no special case is needed
  // (and the evaluation count stays fixed).
  const ParameterVector theta_plus = add_scaled(theta, delta, v);
  const ParameterVector theta_minus = add_scaled(theta, -delta, v);
  GradEval gp = eval_loss_grad(problem, LossKind::Lower, omega, theta_plus, WrtBlocks::OmegaOnly,
                               &local);
  GradEval gm = eval_loss_grad(problem, LossKind::Lower, omega, theta_minus, WrtBlocks::OmegaOnly,
                               &local);

  HypergradientReport rep;
  rep.direct_term = up.omega_grad->flatten();
  const std::vector<double> ap = gp.omega_grad->flatten();
  const std::vector<double> am = gm.omega_grad->flatten();
  rep.coupling_term.resize(ap.size());
  const double scale = -cfg.eta / (2.0 * delta);
  for (size_t i = 0; i < ap.size(); ++i) rep.coupling_term[i] = scale * (ap[i] - am[i]);
  rep.total = combine(rep.direct_term, rep.coupling_term);
  rep.lower_grad_norm = step.grad_norm;
  rep.upper_value = up.value;
  rep.lower_value = step.loss_value;
  rep.fd_delta = delta;
  rep.v_norm = v_norm;
  rep.degenerate_coupling = v_norm < 1e-12;
  rep.eval_counts = local;
  rep.theta_next = std::move(step.theta_next);
  counter += local;
  return rep;
}

namespace {

CouplingResult coupling_from_grads(const ParameterVector& f, const ParameterVector& g,
                                   const ParameterVector& g_omega, double guard_eps) {
  CouplingResult out;
  const double gg = dot(g, g);
  out.lower_grad_norm = std::sqrt(gg);
  std::vector<double> gw = g_omega.flatten();
  if (gg < guard_eps) {
    out.degenerate = true;
    out.coupling.assign(gw.size(), 0.0);
    return out;
  }
  out.coefficient = -dot(f, g) / gg;
  out.coupling.resize(gw.size());
  for (size_t i = 0; i < gw.size(); ++i) out.coupling[i] = out.coefficient * gw[i];
  return out;
}

}  // namespace

CouplingResult ibgl_coupling(const BilevelProblem& problem, const ParameterVector& omega,
                             const ParameterVector& theta, const EstimatorConfig& cfg,
                             EvalCounter& counter) {
  check_config(cfg);
  EvalCounter local;
  GradEval up = eval_loss_grad(problem, LossKind::Upper, omega, theta, WrtBlocks::ThetaOnly,
                               &local);
  GradEval low = eval_loss_grad(problem, LossKind::Lower, omega, theta, WrtBlocks::Both, &local);
  CouplingResult out =
      coupling_from_grads(*up.theta_grad, *low.theta_grad, *low.omega_grad, cfg.guard_eps);
  out.eval_counts = local;
  counter += local;
  return out;
}

HypergradientReport ibgl_hypergradient(const BilevelProblem& problem,
                                       const ParameterVector& omega,
                                       const ParameterVector& theta, const EstimatorConfig& cfg,
                                       EvalCounter& counter) {
  check_config(cfg);
  EvalCounter local;
  GradEval up = eval_loss_grad(problem, LossKind::Upper, omega, theta, WrtBlocks::Both, &local);
  GradEval low = eval_loss_grad(problem, LossKind::Lower, omega, theta, WrtBlocks::Both, &local);
  CouplingResult c =
      coupling_from_grads(*up.theta_grad, *low.theta_grad, *low.omega_grad, cfg.guard_eps);

  HypergradientReport rep;
  rep.direct_term = up.omega_grad->flatten();
  rep.coupling_term = std::move(c.coupling);
  rep.total = combine(rep.direct_term, rep.coupling_term);
  rep.lower_grad_norm = c.lower_grad_norm;
  rep.upper_value = up.value;
  rep.lower_value = low.value;
  rep.degenerate_coupling = c.degenerate;
  rep.eval_counts = local;
  counter += local;
  return rep;
}

}  // namespace bgl
