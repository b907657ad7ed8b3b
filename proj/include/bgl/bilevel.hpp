// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "bgl/parameter_vector.hpp"

namespace bgl {

// A bilevel problem couples an upper objective L_F(omega, theta) with a lower
// objective L_G(omega, theta); omega are the generator parameters updated by
// the outer loop, theta the task parameters updated by the inner loop. Loss
// builders construct the scalar loss on a caller-owned tape from registered
// parameter leaves, so one backward pass can serve whichever gradient blocks
// the caller asked for. Evaluating a loss never mutates the problem.
class BilevelProblem {
 public:
  virtual ~BilevelProblem() = default;

  virtual const ParameterVector& omega_init() const = 0;
  virtual const ParameterVector& theta_init() const = 0;

  virtual Var upper_loss(Tape& tape, const ParamVars& omega, const ParamVars& theta) const = 0;
  virtual Var lower_loss(Tape& tape, const ParamVars& omega, const ParamVars& theta) const = 0;

  // Stochastic problems re-sample their upper/lower batches here, keyed only
  // by (seed, tick) so trajectories replay exactly. Deterministic problems
  // ignore it.
  virtual void draw_batches(uint64_t /*seed*/, uint64_t /*tick*/) {}
};

// Gradient-evaluation bookkeeping. An "evaluation" is one extracted
// (loss, parameter-block) gradient: a single backward pass that yields both
// the omega and theta gradients of a loss counts twice.
struct EvalCounter {
  uint64_t lf_grad_evals = 0;
  uint64_t lg_grad_evals = 0;
  uint64_t lower_updates = 0;
  uint64_t outer_updates = 0;

  EvalCounter& operator+=(const EvalCounter& o);
};

struct EstimatorConfig {
  // Lower-problem step size used by the one-step estimator.
  double eta = 1e-2;
  // Finite-difference scale; the probe step is fd_scale / max(||v||, 1e-12)
  // unless fd_absolute is set, in which case fd_scale is the step itself.
  double fd_scale = 1e-2;
  bool fd_absolute = false;
  // Coupling is dropped (and flagged) when ||grad_theta L_G||^2 falls below
  // this threshold.
  double guard_eps = 1e-12;
  // Conjugate-gradient oracle controls.
  double cg_tol = 1e-10;
  int cg_max_iter = 500;
  // Step scale for the finite-difference Hessian-vector products inside CG.
  double hvp_eps = 1e-6;
};

// Everything a solver needs from one hypergradient estimate. The identity
// total == direct_term + coupling_term holds elementwise by construction.
struct HypergradientReport {
  std::vector<double> total;
  std::vector<double> direct_term;
  std::vector<double> coupling_term;
  double lower_grad_norm = 0.0;
  double upper_value = 0.0;
  double lower_value = 0.0;
  // One-step estimator diagnostics.
  double fd_delta = 0.0;
  double v_norm = 0.0;
  bool degenerate_coupling = false;
  // Cost of this one call.
  EvalCounter eval_counts;
  // Updated lower parameters from the estimator's internal step, when the
  // estimator performs one (the one-step path does, the stationary path
  // does not).
  std::optional<ParameterVector> theta_next;

  double total_norm() const;
  double direct_norm() const;
  double coupling_norm() const;
};

// --- engine internals shared by estimators, oracles and solvers ---

enum class LossKind { Upper, Lower };
enum class WrtBlocks { OmegaOnly, ThetaOnly, Both };

struct GradEval {
  double value = 0.0;
  std::optional<ParameterVector> omega_grad;
  std::optional<ParameterVector> theta_grad;
};

// Builds a fresh tape, evaluates the requested loss at (omega, theta), runs
// one backward pass and extracts the requested gradient blocks. Bumps
// `counter` (when given) by one per extracted block. Throws NumericError on a
// non-finite loss or gradient.
GradEval eval_loss_grad(const BilevelProblem& problem, LossKind kind,
                        const ParameterVector& omega, const ParameterVector& theta,
                        WrtBlocks wrt, EvalCounter* counter);

// Loss value only; no tape gradients, no counter traffic.
double eval_loss_value(const BilevelProblem& problem, LossKind kind,
                       const ParameterVector& omega, const ParameterVector& theta);

}  // namespace bgl
