// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bgl/bilevel.hpp"

namespace bgl {

struct UnrolledBudget {
  int64_t max_dim = 50;
  // Cap on total descent steps summed over the 2*dim(omega) probes.
  int64_t max_steps = 100000;
};

// Reference hypergradient by brute force: central differences over each
// omega coordinate of the composed map
//   phi(omega) = L_F(omega, theta_k(omega)),
// where theta_k is produced by k plain descent steps on L_G starting from
// the (fixed) theta0. k = 0 differentiates L_F(omega, theta0) with theta0
// held constant. Quadratic cost in dim(omega); guarded by `budget`.
std::vector<double> unrolled_hypergradient(const BilevelProblem& problem,
                                           const ParameterVector& omega,
                                           const ParameterVector& theta0, double eta, int64_t k,
                                           const UnrolledBudget& budget = {}, double h = 1e-5);

// Implicit-function hypergradient at a lower stationary point theta*:
// solves (H_theta L_G) q = grad_theta L_F by conjugate gradients, with
// Hessian-vector products taken as central differences of grad_theta L_G,
// then returns
//   grad_omega L_F - [grad_omega L_G(theta*+eps q) - grad_omega L_G(theta*-eps q)] / (2 eps).
// Throws CgError (carrying the last relative residual) if the solve does not
// reach cfg.cg_tol within cfg.cg_max_iter or meets an indefinite direction.
std::vector<double> cg_implicit_hypergradient(const BilevelProblem& problem,
                                              const ParameterVector& omega,
                                              const ParameterVector& theta_star,
                                              const EstimatorConfig& cfg);

}  // namespace bgl
