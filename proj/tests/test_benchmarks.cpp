// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "bgl/benchmarks.hpp"
#include "bgl/errors.hpp"
#include "bgl/estimators.hpp"
#include "bgl/oracles.hpp"
#include "bgl/random.hpp"
#include "bgl/smallmat.hpp"

using namespace bgl;

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

std::vector<double> sub_vec(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return d;
}

}  // namespace

TEST_CASE("generated lower curvature is symmetric positive definite") {
  for (uint64_t seed : {1, 5, 9}) {
    QuadraticBilevel p = make_quadratic(4, 4, seed, 0.3);
    const SmallMatrix& A = p.A();
    for (int64_t i = 0; i < A.rows; ++i)
      for (int64_t j = 0; j < A.cols; ++j)
        CHECK(A.a[static_cast<size_t>(i * A.cols + j)] ==
              doctest::Approx(A.a[static_cast<size_t>(j * A.cols + i)]));
    std::vector<double> eig = jacobi_eigenvalues(A);
    CHECK(eig.front() >= 1.0 - 1e-9);  // M^T M + I keeps eigenvalues above one
  }
}

TEST_CASE("small matrix cholesky solves against matvec") {
  QuadraticBilevel p = make_quadratic(4, 4, 3, 0.3);
  RandomStream rng(5);
  std::vector<double> x(4);
  for (double& v : x) v = rng.normal();
  std::vector<double> b = matvec(p.A(), x);
  SmallMatrix chol = cholesky_factor(p.A());
  std::vector<double> got = cholesky_solve(chol, b);
  CHECK(norm2(sub_vec(got, x)) < 1e-10);

  SmallMatrix indef(2, 2);
  indef.at(0, 0) = 1.0;
  indef.at(1, 1) = -1.0;
  CHECK_THROWS_AS(cholesky_factor(indef), NumericError);
}

TEST_CASE("analytic hypergradient equals the response-function derivative") {
  // Independent finite-difference of F(omega) = L_F(omega, theta*(omega)).
  QuadraticBilevel p = make_quadratic(4, 3, 7, 0.35);
  std::vector<double> omega = p.omega_init().flatten();
  auto response = [&](const std::vector<double>& w) {
    std::vector<double> star = p.lower_minimizer(w);
    double acc = 0.0;
    for (size_t i = 0; i < star.size(); ++i) {
      double d = star[i] - p.t()[i];
      acc += 0.5 * d * d;
    }
    for (double wi : w) acc += 0.5 * p.lambda() * wi * wi;
    return acc;
  };
  std::vector<double> want = p.analytic_hypergradient(omega);
  const double h = 1e-6;
  for (size_t i = 0; i < omega.size(); ++i) {
    std::vector<double> hi = omega, lo = omega;
    hi[i] += h;
    lo[i] -= h;
    double fd = (response(hi) - response(lo)) / (2 * h);
    CHECK(want[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("cubic accessors are fenced off on the pure quadratic") {
  QuadraticBilevel q = make_quadratic(3, 3, 1, 0.3);
  CHECK(q.lower_minimizer(q.omega_init().flatten()).size() == 3);
  CubicLowerBilevel c = make_cubic(3, 3, 1, 0.3, 0.0);
  CHECK(c.gamma() == 0.0);
}

TEST_CASE("cubic gradient admits a stationary point near the quadratic minimizer") {
  CubicLowerBilevel p = make_cubic(4, 4, 11, 0.3, 0.5);
  std::vector<double> omega = p.omega_init().flatten();
  CHECK_THROWS_AS(p.lower_minimizer(omega), NumericError);
  CHECK_THROWS_AS(p.analytic_hypergradient(omega), NumericError);

  // Newton from the gamma = 0 solution; the cubic lower Hessian is
  // A + 6 gamma diag((B^T omega) o theta).
  QuadraticBilevel q = make_quadratic(4, 4, 11, 0.3);
  std::vector<double> th = q.lower_minimizer(omega);
  std::vector<double> bo(th.size());
  {
    std::vector<double> zero(th.size(), 0.0);
    std::vector<double> g0 = p.grad_lower_theta(omega, zero);  // equals -B^T omega
    for (size_t i = 0; i < bo.size(); ++i) bo[i] = -g0[i];
  }
  for (int it = 0; it < 20; ++it) {
    std::vector<double> g = p.grad_lower_theta_cubic(omega, th);
    if (norm2(g) < 1e-14) break;
    SmallMatrix H = p.A();
    for (int64_t i = 0; i < H.rows; ++i)
      H.at(i, i) += 6.0 * p.gamma() * bo[static_cast<size_t>(i)] * th[static_cast<size_t>(i)];
    std::vector<double> d = cholesky_solve(cholesky_factor(H), g);
    for (size_t i = 0; i < th.size(); ++i) th[i] -= d[i];
  }
  CHECK(norm2(p.grad_lower_theta_cubic(omega, th)) < 1e-10);

  CubicLowerBilevel flat = make_cubic(4, 4, 11, 0.3, 0.0);
  std::vector<double> a = flat.lower_minimizer(omega);
  std::vector<double> b = q.lower_minimizer(omega);
  CHECK(norm2(sub_vec(a, b)) < 1e-12);
}

TEST_CASE("cubic mixed product obeys the exact quadrature identity") {
  // For the cubic term the centered difference quotient differs from the
  // exact mixed product by gamma * delta^2 * B (v o v o v), with no higher
  // terms, which pins the quartering behaviour used elsewhere.
  CubicLowerBilevel p = make_cubic(4, 4, 13, 0.3, 0.5);
  std::vector<double> omega = p.omega_init().flatten();
  RandomStream rng(3);
  std::vector<double> theta(4), v(4);
  for (double& x : theta) x = rng.normal();
  for (double& x : v) x = rng.normal();

  for (double delta : {1e-1, 1e-2}) {
    std::vector<double> hi(4), lo(4);
    for (size_t i = 0; i < 4; ++i) {
      hi[i] = theta[i] + delta * v[i];
      lo[i] = theta[i] - delta * v[i];
    }
    std::vector<double> quot = sub_vec(p.grad_lower_omega_cubic(omega, hi),
                                       p.grad_lower_omega_cubic(omega, lo));
    for (double& x : quot) x /= 2 * delta;

    std::vector<double> v3(4);
    for (size_t i = 0; i < 4; ++i) v3[i] = v[i] * v[i] * v[i];
    std::vector<double> correction = matvec(p.B(), v3);
    std::vector<double> mixed = p.mixed_product(theta, v);
    for (size_t i = 0; i < 4; ++i)
      CHECK(quot[i] - mixed[i] ==
            doctest::Approx(p.gamma() * delta * delta * correction[i]).epsilon(1e-8));
  }
}

TEST_CASE("one-step coupling error quarters per halved probe width") {
  CubicLowerBilevel p = make_cubic(4, 4, 17, 0.4, 0.5);
  std::vector<double> omega = p.omega_init().flatten();
  std::vector<double> theta = p.theta_init().flatten();

  auto coupling_error = [&](double delta) {
    EstimatorConfig cfg;
    cfg.eta = 0.05;
    cfg.fd_scale = delta;
    cfg.fd_absolute = true;
    EvalCounter c;
    HypergradientReport rep = tbgl_hypergradient(p, p.omega_init(), p.theta_init(), cfg, c);
    std::vector<double> g = p.grad_lower_theta_cubic(omega, theta);
    std::vector<double> theta_next(theta.size());
    for (size_t i = 0; i < theta.size(); ++i) theta_next[i] = theta[i] - cfg.eta * g[i];
    std::vector<double> v = p.grad_upper_theta(theta_next);
    std::vector<double> mixed = p.mixed_product(theta, v);
    std::vector<double> exact(mixed.size());
    for (size_t i = 0; i < mixed.size(); ++i) exact[i] = -cfg.eta * mixed[i];
    return norm2(sub_vec(rep.coupling_term, exact));
  };

  double delta = 1e-1;
  double prev = coupling_error(delta);
  for (int i = 0; i < 6; ++i) {
    delta *= 0.5;
    double cur = coupling_error(delta);
    if (cur < 1e-12) break;
    double ratio = prev / cur;
    CHECK(ratio > 3.5);
    CHECK(ratio < 4.5);
    prev = cur;
  }
}

TEST_CASE("inner descent contracts at the spectral rate") {
  QuadraticBilevel p = make_quadratic(4, 4, 19, 0.3);
  std::vector<double> omega = p.omega_init().flatten();
  std::vector<double> star = p.lower_minimizer(omega);
  std::vector<double> eig = jacobi_eigenvalues(p.A());
  const double eta = 1.5 / eig.back();
  double bound = 0.0;
  for (double l : eig) bound = std::max(bound, std::abs(1.0 - eta * l));

  ParameterVector theta = p.theta_init();
  EvalCounter c;
  std::vector<double> err;
  for (int k = 0; k < 61; ++k) {
    err.push_back(norm2(sub_vec(theta.flatten(), star)));
    theta = lower_step(p, p.omega_init(), theta, eta, c).theta_next;
  }
  // Asymptotic per-step contraction, averaged over the tail.
  double rate = std::pow(err[60] / err[10], 1.0 / 50.0);
  CHECK(rate == doctest::Approx(bound).epsilon(0.1));
}

TEST_CASE("scaled wrapper multiplies the lower objective only") {
  QuadraticBilevel p = make_quadratic(3, 3, 23, 0.3);
  ScaledLowerProblem scaled(p, 7.0);
  double base_lower = eval_loss_value(p, LossKind::Lower, p.omega_init(), p.theta_init());
  double scaled_lower =
      eval_loss_value(scaled, LossKind::Lower, p.omega_init(), p.theta_init());
  CHECK(scaled_lower == doctest::Approx(7.0 * base_lower).epsilon(1e-12));
  double base_upper = eval_loss_value(p, LossKind::Upper, p.omega_init(), p.theta_init());
  double scaled_upper =
      eval_loss_value(scaled, LossKind::Upper, p.omega_init(), p.theta_init());
  CHECK(scaled_upper == doctest::Approx(base_upper).epsilon(1e-15));
}

TEST_CASE("benchmark fixtures round trip through disk") {
  namespace fs = std::filesystem;
  const std::string dir = "t_bench_fixture";
  fs::remove_all(dir);

  CubicLowerBilevel p = make_cubic(3, 4, 29, 0.45, 0.25);
  save_cubic(dir, p);
  CubicLowerBilevel back = load_cubic(dir);
  CHECK(back.m() == p.m());
  CHECK(back.n() == p.n());
  CHECK(back.lambda() == doctest::Approx(p.lambda()));
  CHECK(back.gamma() == doctest::Approx(p.gamma()));
  // Tensor payloads are stored in single precision.
  for (size_t i = 0; i < p.B().a.size(); ++i)
    CHECK(back.B().a[i] == doctest::Approx(p.B().a[i]).epsilon(1e-6));
  // Exercise every stored field through quantities defined for gamma != 0:
  // A, B and omega0 via the lower gradient, t and theta0 via the upper one,
  // lambda via the omega gradient, gamma via the mixed product.
  std::vector<double> omega = p.omega_init().flatten();
  std::vector<double> theta = p.theta_init().flatten();
  std::vector<double> omega_b = back.omega_init().flatten();
  std::vector<double> theta_b = back.theta_init().flatten();
  auto close = [](const std::vector<double>& x, const std::vector<double>& y) {
    return norm2(sub_vec(x, y)) / std::max(1.0, norm2(x)) < 1e-5;
  };
  CHECK(close(p.grad_lower_theta_cubic(omega, theta),
              back.grad_lower_theta_cubic(omega_b, theta_b)));
  CHECK(close(p.grad_upper_theta(theta), back.grad_upper_theta(theta_b)));
  CHECK(close(p.grad_upper_omega(omega), back.grad_upper_omega(omega_b)));
  CHECK(close(p.mixed_product(theta, theta), back.mixed_product(theta_b, theta_b)));

  // The quadratic loader refuses a fixture with a cubic term.
  CHECK_THROWS_AS(load_quadratic(dir), IoError);

  QuadraticBilevel q = make_quadratic(3, 3, 31, 0.3);
  save_quadratic(dir + "_q", q);
  QuadraticBilevel qb = load_quadratic(dir + "_q");
  CHECK(qb.lambda() == doctest::Approx(q.lambda()));
  fs::remove_all(dir);
  fs::remove_all(dir + "_q");
}
