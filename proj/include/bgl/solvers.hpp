// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "bgl/estimators.hpp"

namespace bgl {

enum class LrDecay { Constant, Linear, Cosine };
enum class Strategy { Naive, Tbgl, Ibgl };

// Cosine interpolation from init at step 0 to final at step total.
double lr_schedule(int64_t step, int64_t total, double init, double final_value);
double lr_at(int64_t step, int64_t total, double init, double final_value, LrDecay decay);

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

struct SolverConfig {
  Strategy strategy = Strategy::Ibgl;

  int64_t warm_steps = 0;
  double warm_lr = 1e-4;

  double upper_lr_init = 3e-3;
  double upper_lr_final = 5e-6;
  double lower_lr_init = 3e-3;
  double lower_lr_final = 3e-5;
  LrDecay decay = LrDecay::Cosine;

  // Lower steps per outer step (the stationary-coupling driver); the one-step
  // driver requires k == 1.
  int64_t k = 1;
  int64_t outer_steps = 0;
  int64_t batch_size = 8;
  uint64_t seed = 0;

  // Heavy-ball momentum on the outer update; 0 is plain descent and keeps
  // trajectories exactly reproducible by the closed-form tests.
  double momentum = 0.0;

  EstimatorConfig estimator;

  void validate() const;
};

// Mutable training snapshot threaded from the warm phase through a solve.
// `tick` counts batch draws, which is the only random state a trajectory
// has, so replays are exact for a given (config, seed).
struct TrainState {
  ParameterVector omega;
  ParameterVector theta;
  uint64_t tick = 0;
  EvalCounter counters;
  std::vector<double> lower_history;
};

TrainState init_state(const BilevelProblem& problem);

struct StepInfo {
  int64_t step = 0;
  double lr_upper = 0.0;
  double lr_lower = 0.0;
  double upper_value = 0.0;
  double lower_value = 0.0;
  double hyper_norm = 0.0;
  double direct_norm = 0.0;
  double coupling_norm = 0.0;
  double lower_grad_norm = 0.0;
  bool degenerate = false;
  EvalCounter counters;  // cumulative snapshot
};
using StepCallback = std::function<void(const StepInfo&)>;

// warm_steps of simultaneous descent of (omega, theta) on the lower objective
// at warm_lr, starting from the problem's initial parameters. Per-step lower
// losses land in the returned state's lower_history.
TrainState warm_start(BilevelProblem& problem, const SolverConfig& cfg);

// Outer loop with the one-step hypergradient: each outer step adopts the
// estimator's internal lower step for theta, then descends omega.
void tbgl_solve(BilevelProblem& problem, TrainState& state, const SolverConfig& cfg,
                const StepCallback& on_step = {});

// Outer loop with the stationary coupling: k lower steps per outer step, then
// one omega update from the rank-one-corrected hypergradient.
void ibgl_solve(BilevelProblem& problem, TrainState& state, const SolverConfig& cfg,
                const StepCallback& on_step = {});

// Joint descent of (omega, theta) on the lower objective alone; the
// no-feedback baseline (warm start continued under the scheduled rates).
void naive_joint_solve(BilevelProblem& problem, TrainState& state, const SolverConfig& cfg,
                       const StepCallback& on_step = {});

// Dispatch on cfg.strategy.
void solve(BilevelProblem& problem, TrainState& state, const SolverConfig& cfg,
           const StepCallback& on_step = {});

}  // namespace bgl
