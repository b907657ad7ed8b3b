// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace bgl {

namespace {

double unrolled_value(const BilevelProblem& problem, const ParameterVector& omega,
                      const ParameterVector& theta0, double eta, int64_t k) {
  ParameterVector theta = theta0;
  for (int64_t i = 0; i < k; ++i) {
    GradEval g =
        eval_loss_grad(problem, LossKind::Lower, omega, theta, WrtBlocks::ThetaOnly, nullptr);
    theta = add_scaled(theta, -eta, *g.theta_grad);
  }
  return eval_loss_value(problem, LossKind::Upper, omega, theta);
}

}  // namespace

std::vector<double> unrolled_hypergradient(const BilevelProblem& problem,
                                           const ParameterVector& omega,
                                           const ParameterVector& theta0, double eta, int64_t k,
                                           const UnrolledBudget& budget, double h) {
  if (k < 0) throw ShapeError("unrolled step count must be >= 0");
  if (k > 0 && !(eta > 0.0)) throw ShapeError("unrolled eta must be positive");
  if (!(h > 0.0)) throw ShapeError("unrolled fd step must be positive");
  if (omega.total_len() > budget.max_dim) {
    throw BudgetError("omega dimension " + std::to_string(omega.total_len()) +
                      " exceeds unrolled-oracle budget " + std::to_string(budget.max_dim));
  }
  const int64_t total_steps = 2 * omega.total_len() * k;
  if (total_steps > budget.max_steps) {
    throw BudgetError("unrolled probes need " + std::to_string(total_steps) +
                      " descent steps, over budget " + std::to_string(budget.max_steps));
  }

  std::vector<double> flat = omega.flatten();
  std::vector<double> grad(flat.size());
  for (size_t j = 0; j < flat.size(); ++j) {
    const double orig = flat[j];
    flat[j] = orig + h;
    const double up = unrolled_value(problem, omega.unflatten(flat), theta0, eta, k);
    flat[j] = orig - h;
    const double down = unrolled_value(problem, omega.unflatten(flat), theta0, eta, k);
    flat[j] = orig;
    grad[j] = (up - down) / (2.0 * h);
  }
  return grad;
}

namespace {

struct FlatOps {
  static double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  }
  static double nrm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }
};

}  // namespace

std::vector<double> cg_implicit_hypergradient(const BilevelProblem& problem,
                                              const ParameterVector& omega,
                                              const ParameterVector& theta_star,
                                              const EstimatorConfig& cfg) {
  if (!(cfg.cg_tol > 0.0) || cfg.cg_max_iter < 1) throw ShapeError("bad cg oracle config");
  if (!(cfg.hvp_eps > 0.0)) throw ShapeError("hvp_eps must be positive");

  GradEval up =
      eval_loss_grad(problem, LossKind::Upper, omega, theta_star, WrtBlocks::Both, nullptr);
  std::vector<double> direct = up.omega_grad->flatten();
  const std::vector<double> f = up.theta_grad->flatten();
  const double f_norm = FlatOps::nrm(f);
  const double theta_scale = 1.0 + norm(theta_star);

  // Central-difference product of a lower-objective second derivative with
  // direction `dir`; `wrt` picks the gradient block being differenced.
  auto second_diff = [&](const std::vector<double>& dir, WrtBlocks wrt) {
    const double dir_norm = FlatOps::nrm(dir);
    const double eps = cfg.hvp_eps * theta_scale / std::max(dir_norm, 1e-12);
    const ParameterVector dir_pv = theta_star.unflatten(dir);
    const ParameterVector tp = add_scaled(theta_star, eps, dir_pv);
    const ParameterVector tm = add_scaled(theta_star, -eps, dir_pv);
    GradEval gp = eval_loss_grad(problem, LossKind::Lower, omega, tp, wrt, nullptr);
    GradEval gm = eval_loss_grad(problem, LossKind::Lower, omega, tm, wrt, nullptr);
    const std::vector<double> a =
        (wrt == WrtBlocks::ThetaOnly ? gp.theta_grad : gp.omega_grad)->flatten();
    const std::vector<double> b =
        (wrt == WrtBlocks::ThetaOnly ? gm.theta_grad : gm.omega_grad)->flatten();
    std::vector<double> out(a.size());
    for (size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - b[i]) / (2.0 * eps);
    return out;
  };

  // grad_theta L_F = 0 means the implicit correction vanishes outright.
  if (f_norm == 0.0) return direct;

  // CG on H q = f with H the lower-objective theta-Hessian at theta*.
  std::vector<double> q(f.size(), 0.0);
  std::vector<double> r = f;
  std::vector<double> p = f;
  double rr = FlatOps::dot(r, r);
  bool converged = false;
  int iters = 0;
  for (; iters < cfg.cg_max_iter; ++iters) {
    if (std::sqrt(rr) <= cfg.cg_tol * f_norm) {
      converged = true;
      break;
    }
    const std::vector<double> hp = second_diff(p, WrtBlocks::ThetaOnly);
    const double php = FlatOps::dot(p, hp);
    if (!(php > 0.0)) {
      throw CgError("cg met a non-positive curvature direction", std::sqrt(rr) / f_norm, iters);
    }
    const double alpha = rr / php;
    for (size_t i = 0; i < q.size(); ++i) q[i] += alpha * p[i];
    for (size_t i = 0; i < r.size(); ++i) r[i] -= alpha * hp[i];
    const double rr_new = FlatOps::dot(r, r);
    const double beta = rr_new / rr;
    for (size_t i = 0; i < p.size(); ++i) p[i] = r[i] + beta * p[i];
    rr = rr_new;
  }
  if (!converged && std::sqrt(rr) > cfg.cg_tol * f_norm) {
    throw CgError("cg did not reach tolerance", std::sqrt(rr) / f_norm, iters);
  }

  // Mixed-block product (grad over omega, differenced along q in theta).
  const std::vector<double> mixed = second_diff(q, WrtBlocks::OmegaOnly);
  std::vector<double> total(direct.size());
  for (size_t i = 0; i < direct.size(); ++i) total[i] = direct[i] - mixed[i];
  return total;
}

}  // namespace bgl
