// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>

#include "bgl/bilevel.hpp"
#include "bgl/smallmat.hpp"

namespace bgl {

// Closed-form test problem:
//   L_G(omega, theta) = 1/2 theta^T A theta - omega^T B theta
//   L_F(omega, theta) = 1/2 ||theta - t||^2 + lambda/2 ||omega||^2
// with A symmetric positive definite, so the lower minimiser is
// theta*(omega) = A^{-1} B^T omega and the response-differentiated gradient
//   d/d omega L_F(omega, theta*(omega)) = lambda omega + B A^{-1} (theta* - t)
// is available exactly. Every quantity the estimators approximate has a hand
// computable counterpart here.
class QuadraticBilevel : public BilevelProblem {
 public:
  QuadraticBilevel(SmallMatrix A, SmallMatrix B, std::vector<double> t, double lambda,
                   std::vector<double> omega0, std::vector<double> theta0);

  const ParameterVector& omega_init() const override { return omega0_; }
  const ParameterVector& theta_init() const override { return theta0_; }
  Var upper_loss(Tape& tape, const ParamVars& omega, const ParamVars& theta) const override;
  Var lower_loss(Tape& tape, const ParamVars& omega, const ParamVars& theta) const override;

  int64_t m() const { return B_.rows; }
  int64_t n() const { return B_.cols; }
  const SmallMatrix& A() const { return A_; }
  const SmallMatrix& B() const { return B_; }
  const std::vector<double>& t() const { return t_; }
  double lambda() const { return lambda_; }

  // theta*(omega) via the cached Cholesky factor of A.
  virtual std::vector<double> lower_minimizer(const std::vector<double>& omega) const;
  // Exact hypergradient of the response function at omega.
  virtual std::vector<double> analytic_hypergradient(const std::vector<double>& omega) const;
  // Exact product of the mixed second derivative block with a theta-space
  // direction v (the quantity the one-step estimator's difference quotient
  // approximates): here simply -B v.
  virtual std::vector<double> mixed_product(const std::vector<double>& theta,
                                            const std::vector<double>& v) const;

  // Hand-written first derivatives for cross-checking the tape.
  std::vector<double> grad_lower_theta(const std::vector<double>& omega,
                                       const std::vector<double>& theta) const;
  std::vector<double> grad_lower_omega(const std::vector<double>& omega,
                                       const std::vector<double>& theta) const;
  std::vector<double> grad_upper_theta(const std::vector<double>& theta) const;
  std::vector<double> grad_upper_omega(const std::vector<double>& omega) const;

 protected:
  virtual Var lower_extra(Tape&, const ParamVars&, const ParamVars&) const { return Var{}; }

  SmallMatrix A_, B_, Bt_, chol_;
  std::vector<double> t_;
  double lambda_;
  ParameterVector omega0_, theta0_;
  Tensor A_tensor_, B_tensor_, Bt_tensor_, t_tensor_;
};

// Same upper problem over a lower objective with a cubic coupling term:
//   L_G += gamma * sum_i (B^T omega)_i theta_i^3.
// The third theta-derivative is nonzero for gamma != 0 and the omega gradient
// of L_G becomes cubic in theta, which is what gives the one-step estimator's
// difference quotient its measurable O(delta^2) error. The quadratic closed
// forms no longer apply, so those accessors throw when gamma != 0.
class CubicLowerBilevel : public QuadraticBilevel {
 public:
  CubicLowerBilevel(SmallMatrix A, SmallMatrix B, std::vector<double> t, double lambda,
                    double gamma, std::vector<double> omega0, std::vector<double> theta0);

  double gamma() const { return gamma_; }

  std::vector<double> lower_minimizer(const std::vector<double>& omega) const override;
  std::vector<double> analytic_hypergradient(const std::vector<double>& omega) const override;
  // B ((3 gamma theta^2 - 1) * v), elementwise product in theta space.
  std::vector<double> mixed_product(const std::vector<double>& theta,
                                    const std::vector<double>& v) const override;

  std::vector<double> grad_lower_theta_cubic(const std::vector<double>& omega,
                                             const std::vector<double>& theta) const;
  std::vector<double> grad_lower_omega_cubic(const std::vector<double>& omega,
                                             const std::vector<double>& theta) const;

 protected:
  Var lower_extra(Tape& tape, const ParamVars& omega, const ParamVars& theta) const override;

  double gamma_;
};

// Random instance with A = M^T M + I (entries of M, B, t and the initial
// parameters uniform in [-1, 1]), reproducible from the seed.
QuadraticBilevel make_quadratic(int64_t m, int64_t n, uint64_t seed, double lambda);
CubicLowerBilevel make_cubic(int64_t m, int64_t n, uint64_t seed, double lambda, double gamma);

// Lower objective scaled by a positive constant, leaving the upper objective
// untouched. Used to probe scale invariance of the stationary coupling.
class ScaledLowerProblem : public BilevelProblem {
 public:
  ScaledLowerProblem(const BilevelProblem& base, double scale) : base_(base), scale_(scale) {
    if (!(scale > 0.0)) throw ShapeError("lower-loss scale must be positive");
  }
  const ParameterVector& omega_init() const override { return base_.omega_init(); }
  const ParameterVector& theta_init() const override { return base_.theta_init(); }
  Var upper_loss(Tape& tape, const ParamVars& o, const ParamVars& th) const override {
    return base_.upper_loss(tape, o, th);
  }
  Var lower_loss(Tape& tape, const ParamVars& o, const ParamVars& th) const override {
    return mul_scalar(base_.lower_loss(tape, o, th), scale_);
  }

 private:
  const BilevelProblem& base_;
  double scale_;
};

// Regression-fixture IO: A, B, t and the initial parameters as tensor files
// plus a manifest.json carrying lambda and gamma. Payloads land at single
// precision, so a stored fixture is its own ground truth rather than a
// bit-exact copy of the instance that produced it.
void save_cubic(const std::string& dir, const CubicLowerBilevel& p);
CubicLowerBilevel load_cubic(const std::string& dir);
void save_quadratic(const std::string& dir, const QuadraticBilevel& p);
QuadraticBilevel load_quadratic(const std::string& dir);

}  // namespace bgl
