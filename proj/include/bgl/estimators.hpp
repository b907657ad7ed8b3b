// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bgl/bilevel.hpp"

namespace bgl {

struct LowerStepResult {
  ParameterVector theta_next;
  double grad_norm = 0.0;
  double loss_value = 0.0;
};

// One plain gradient-descent step on the lower objective:
//   theta' = theta - lr * grad_theta L_G(omega, theta)
// Costs one L_G gradient evaluation and one lower update.
LowerStepResult lower_step(const BilevelProblem& problem, const ParameterVector& omega,
                           const ParameterVector& theta, double lr, EvalCounter& counter);

// One-step hypergradient: runs the internal lower step theta' = theta - eta*g,
// takes v = grad_theta' L_F(omega, theta'), probes the lower objective's omega
// gradient at theta +/- delta*v and assembles
//   total = grad_omega L_F(omega, theta')
//         - eta * [grad_omega L_G(omega, theta+) - grad_omega L_G(omega, theta-)] / (2 delta)
// with delta = fd_scale / max(||v||, 1e-12) (or fd_scale itself when
// fd_absolute is set). Exactly 2 L_F gradient evaluations, 3 L_G gradient
// evaluations and 1 lower update; theta_next carries theta' for the solver.
HypergradientReport tbgl_hypergradient(const BilevelProblem& problem,
                                       const ParameterVector& omega,
                                       const ParameterVector& theta, const EstimatorConfig& cfg,
                                       EvalCounter& counter);

struct CouplingResult {
  std::vector<double> coupling;
  double coefficient = 0.0;  // -(f.g)/(g.g), zero when degenerate
  double lower_grad_norm = 0.0;
  bool degenerate = false;
  EvalCounter eval_counts;
};

// Stationary-point coupling from rank-one curvature surrogates:
//   G_C = -(f.g / g.g) * g_omega
// where f = grad_theta L_F, g = grad_theta L_G and g_omega = grad_omega L_G,
// all at the current (omega, theta). When g.g < guard_eps the coupling is
// zero and flagged degenerate. Invariant under rescaling L_G by any c > 0.
CouplingResult ibgl_coupling(const BilevelProblem& problem, const ParameterVector& omega,
                             const ParameterVector& theta, const EstimatorConfig& cfg,
                             EvalCounter& counter);

// total = grad_omega L_F(omega, theta) + ibgl coupling. Exactly 2 L_F and
// 2 L_G gradient evaluations; performs no lower update itself (solvers run
// their k lower steps before calling this).
HypergradientReport ibgl_hypergradient(const BilevelProblem& problem,
                                       const ParameterVector& omega,
                                       const ParameterVector& theta, const EstimatorConfig& cfg,
                                       EvalCounter& counter);

}  // namespace bgl
