// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/harness/verification.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bgl/errors.hpp"
#include "bgl/harness/run_record.hpp"
#include "bgl/oracles.hpp"
#include "bgl/random.hpp"
#include "bgl/smallmat.hpp"
#include "bgl/solvers.hpp"

namespace bgl {

namespace {

double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double rel_gap(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return norm2(d) / std::max({norm2(a), norm2(b), 1e-12});
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

double stable_eta(const QuadraticBilevel& p) {
  std::vector<double> eig = jacobi_eigenvalues(p.A());
  return 1.0 / eig.back();
}

std::vector<double> random_vec(size_t n, RandomStream& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

std::string fmt(double v) { return format_double(v); }

struct Suite {
  const VerifyOptions& opts;
  VerificationHooks hooks;
  VerificationReport rep;

  void add(const std::string& name, bool pass, const std::string& detail) {
    rep.checks.push_back({name, pass, detail});
  }

  void oracle_triangle() {
    double worst = 0.0;
    for (int64_t seed = 1; seed <= opts.seeds; ++seed) {
      QuadraticBilevel p = make_quadratic(5, 5, static_cast<uint64_t>(seed), 0.3);
      const std::vector<double> omega = p.omega_init().flatten();
      const std::vector<double> analytic = p.analytic_hypergradient(omega);
      ParameterVector theta_star = p.theta_init().unflatten(p.lower_minimizer(omega));
      EstimatorConfig ecfg;
      const std::vector<double> implicit_hg =
          cg_implicit_hypergradient(p, p.omega_init(), theta_star, ecfg);
      const std::vector<double> unrolled =
          unrolled_hypergradient(p, p.omega_init(), p.theta_init(), stable_eta(p), 200);
      worst = std::max({worst, rel_gap(analytic, implicit_hg), rel_gap(analytic, unrolled),
                        rel_gap(implicit_hg, unrolled)});
    }
    add("oracle_triangle", worst <= 1e-5, "max pairwise rel gap " + fmt(worst));
  }

  void tbgl_exact_quadratic() {
    QuadraticBilevel p = make_quadratic(4, 3, 7, 0.4);
    const std::vector<double> omega = p.omega_init().flatten();
    const std::vector<double> theta = p.theta_init().flatten();
    double worst = 0.0;
    for (double delta : {1e-1, 1e-2, 1e-3}) {
      EstimatorConfig cfg;
      cfg.eta = 0.05;
      cfg.fd_scale = delta;
      cfg.fd_absolute = true;
      EvalCounter counter;
      HypergradientReport hg = hooks.tbgl(p, p.omega_init(), p.theta_init(), cfg, counter);

      std::vector<double> g = p.grad_lower_theta(omega, theta);
      std::vector<double> theta_next(theta.size());
      for (size_t i = 0; i < theta.size(); ++i) theta_next[i] = theta[i] - cfg.eta * g[i];
      std::vector<double> v = p.grad_upper_theta(theta_next);
      std::vector<double> exact = p.grad_upper_omega(omega);
      std::vector<double> mixed = p.mixed_product(theta, v);
      for (size_t i = 0; i < exact.size(); ++i) exact[i] -= cfg.eta * mixed[i];

      worst = std::max(worst, max_abs_diff(hg.total, exact));
    }
    add("tbgl_exact_quadratic", worst <= 1e-8, "max abs gap " + fmt(worst));
  }

  // Error of the difference quotient against the exact mixed product on the
  // cubic family; quartering per halved probe width is the expected order.
  void tbgl_fd_order_cubic() {
    CubicLowerBilevel p = make_cubic(4, 4, 11, 0.4, 0.5);
    const std::vector<double> omega = p.omega_init().flatten();
    const std::vector<double> theta = p.theta_init().flatten();

    auto coupling_error = [&](double delta) {
      EstimatorConfig cfg;
      cfg.eta = 0.05;
      cfg.fd_scale = delta;
      cfg.fd_absolute = true;
      EvalCounter counter;
      HypergradientReport hg = hooks.tbgl(p, p.omega_init(), p.theta_init(), cfg, counter);
      std::vector<double> g = p.grad_lower_theta(omega, theta);
      std::vector<double> theta_next(theta.size());
      for (size_t i = 0; i < theta.size(); ++i) theta_next[i] = theta[i] - cfg.eta * g[i];
      std::vector<double> v = p.grad_upper_theta(theta_next);
      std::vector<double> mixed = p.mixed_product(theta, v);
      std::vector<double> exact(mixed.size());
      for (size_t i = 0; i < mixed.size(); ++i) exact[i] = -cfg.eta * mixed[i];
      std::vector<double> diff(exact.size());
      for (size_t i = 0; i < exact.size(); ++i) diff[i] = hg.coupling_term[i] - exact[i];
      return norm2(diff);
    };

    for (double delta : opts.deltas) rep.delta_sweep.push_back({delta, coupling_error(delta)});

    bool pass = true;
    std::string detail;
    double delta = 1e-1;
    double prev = coupling_error(delta);
    for (int i = 0; i < 6; ++i) {
      delta *= 0.5;
      double cur = coupling_error(delta);
      if (cur < 1e-12) break;  // into roundoff, ratios meaningless
      double ratio = prev / cur;
      if (!detail.empty()) detail += " ";
      detail += fmt(ratio);
      if (ratio < 3.5 || ratio > 4.5) pass = false;
      prev = cur;
    }
    add("tbgl_fd_order_cubic", pass, "halving ratios " + detail);
  }

  void ibgl_parallel() {
    double worst = 1.0;
    for (uint64_t seed = 1; seed <= static_cast<uint64_t>(opts.seeds); ++seed) {
      QuadraticBilevel p = make_quadratic(5, 4, seed + 20, 0.3);
      RandomStream rng(mix_seed(seed, 41));
      std::vector<double> omega = random_vec(static_cast<size_t>(p.m()), rng);
      std::vector<double> theta = random_vec(static_cast<size_t>(p.n()), rng);
      ParameterVector om = p.omega_init().unflatten(omega);
      ParameterVector th = p.theta_init().unflatten(theta);
      EstimatorConfig cfg;
      EvalCounter counter;
      CouplingResult c = hooks.ibgl(p, om, th, cfg, counter);
      std::vector<double> g_omega = p.grad_lower_omega(omega, theta);
      double denom = norm2(c.coupling) * norm2(g_omega);
      if (denom < 1e-300) {
        worst = 0.0;
        continue;
      }
      worst = std::min(worst, std::abs(dot(c.coupling, g_omega)) / denom);
    }
    add("ibgl_parallel", worst >= 1.0 - 1e-10, "min |cos| " + fmt(worst));
  }

  void ibgl_scale_invariance() {
    QuadraticBilevel p = make_quadratic(5, 4, 33, 0.3);
    EstimatorConfig cfg;
    EvalCounter counter;
    CouplingResult base = hooks.ibgl(p, p.omega_init(), p.theta_init(), cfg, counter);
    double worst = 0.0;
    for (double c : {0.1, 7.0, 100.0}) {
      ScaledLowerProblem scaled(p, c);
      EvalCounter counter2;
      CouplingResult got = hooks.ibgl(scaled, p.omega_init(), p.theta_init(), cfg, counter2);
      double gap = max_abs_diff(base.coupling, got.coupling);
      worst = std::max(worst, gap / std::max(1.0, norm2(base.coupling)));
    }
    add("ibgl_scale_invariance", worst <= 1e-12, "max scaled gap " + fmt(worst));
  }

  void ibgl_orthogonal_zero() {
    QuadraticBilevel seed_problem = make_quadratic(5, 4, 55, 0.3);
    RandomStream rng(977);
    std::vector<double> omega = random_vec(static_cast<size_t>(seed_problem.m()), rng);
    std::vector<double> theta = random_vec(static_cast<size_t>(seed_problem.n()), rng);
    std::vector<double> g = seed_problem.grad_lower_theta(omega, theta);
    std::vector<double> r = random_vec(theta.size(), rng);
    const double coef = dot(r, g) / dot(g, g);
    // t = theta - f_target makes grad_theta L_F = f_target, orthogonal to g.
    std::vector<double> t(theta.size());
    for (size_t i = 0; i < t.size(); ++i) t[i] = theta[i] - (r[i] - coef * g[i]);
    QuadraticBilevel p(seed_problem.A(), seed_problem.B(), t, seed_problem.lambda(), omega,
                       theta);
    EstimatorConfig cfg;
    EvalCounter counter;
    CouplingResult c = hooks.ibgl(p, p.omega_init(), p.theta_init(), cfg, counter);
    double worst = 0.0;
    for (double x : c.coupling) worst = std::max(worst, std::abs(x));
    add("ibgl_orthogonal_zero", worst <= 1e-12, "max |coupling| " + fmt(worst));
  }

  void eval_counts() {
    QuadraticBilevel p = make_quadratic(4, 4, 3, 0.3);
    EstimatorConfig cfg;
    bool pass = true;
    std::string detail;

    EvalCounter ct;
    hooks.tbgl(p, p.omega_init(), p.theta_init(), cfg, ct);
    pass = pass && ct.lf_grad_evals == 2 && ct.lg_grad_evals == 3 && ct.lower_updates == 1;
    detail += "tbgl " + std::to_string(ct.lf_grad_evals) + "/" +
              std::to_string(ct.lg_grad_evals) + "/" + std::to_string(ct.lower_updates);

    EvalCounter ci;
    ibgl_hypergradient(p, p.omega_init(), p.theta_init(), cfg, ci);
    pass = pass && ci.lf_grad_evals == 2 && ci.lg_grad_evals == 2 && ci.lower_updates == 0;
    detail += " ibgl " + std::to_string(ci.lf_grad_evals) + "/" +
              std::to_string(ci.lg_grad_evals) + "/" + std::to_string(ci.lower_updates);

    SolverConfig scfg;
    scfg.strategy = Strategy::Ibgl;
    scfg.k = 5;
    scfg.outer_steps = 3;
    scfg.decay = LrDecay::Constant;
    scfg.upper_lr_init = scfg.upper_lr_final = 1e-3;
    scfg.lower_lr_init = scfg.lower_lr_final = 1e-3;
    TrainState state = init_state(p);
    ibgl_solve(p, state, scfg);
    pass = pass && state.counters.lower_updates == 15 && state.counters.lg_grad_evals == 21;
    detail += " solve " + std::to_string(state.counters.lg_grad_evals) + "/" +
              std::to_string(state.counters.lower_updates);

    add("eval_counts", pass, detail);
  }

  void unrolled_converges() {
    QuadraticBilevel p = make_quadratic(5, 5, 1, 0.3);
    const std::vector<double> omega = p.omega_init().flatten();
    const std::vector<double> analytic = p.analytic_hypergradient(omega);
    const double eta = stable_eta(p);
    for (int64_t k : opts.ks) {
      std::vector<double> u = unrolled_hypergradient(p, p.omega_init(), p.theta_init(), eta, k);
      std::vector<double> d(u.size());
      for (size_t i = 0; i < u.size(); ++i) d[i] = u[i] - analytic[i];
      rep.k_sweep.push_back({static_cast<double>(k), norm2(d)});
    }
    bool pass = rep.k_sweep.size() >= 2 &&
                rep.k_sweep.back().error < rep.k_sweep.front().error;
    add("unrolled_converges", pass,
        "error " + fmt(rep.k_sweep.front().error) + " -> " + fmt(rep.k_sweep.back().error));
  }
};

}  // namespace

bool VerificationReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::vector<std::string> VerificationReport::failing() const {
  std::vector<std::string> out;
  for (const CheckResult& c : checks)
    if (!c.pass) out.push_back(c.name);
  return out;
}

VerificationReport run_verification(const VerifyOptions& opts, const VerificationHooks& hooks) {
  Suite suite{opts, hooks, {}};
  if (!suite.hooks.tbgl) {
    suite.hooks.tbgl = [](const BilevelProblem& p, const ParameterVector& om,
                          const ParameterVector& th, const EstimatorConfig& cfg,
                          EvalCounter& ct) { return tbgl_hypergradient(p, om, th, cfg, ct); };
  }
  if (!suite.hooks.ibgl) {
    suite.hooks.ibgl = [](const BilevelProblem& p, const ParameterVector& om,
                          const ParameterVector& th, const EstimatorConfig& cfg,
                          EvalCounter& ct) { return ibgl_coupling(p, om, th, cfg, ct); };
  }
  suite.oracle_triangle();
  suite.tbgl_exact_quadratic();
  suite.tbgl_fd_order_cubic();
  suite.ibgl_parallel();
  suite.ibgl_scale_invariance();
  suite.ibgl_orthogonal_zero();
  suite.eval_counts();
  suite.unrolled_converges();
  return suite.rep;
}

nlohmann::json verification_json(const VerificationReport& rep) {
  nlohmann::json checks = nlohmann::json::array();
  for (const CheckResult& c : rep.checks)
    checks.push_back({{"name", c.name}, {"pass", c.pass}, {"detail", c.detail}});
  nlohmann::json j;
  j["checks"] = checks;
  j["all_pass"] = rep.all_pass();
  j["failing"] = rep.failing();
  return j;
}

void write_verification_outputs(const std::string& dir, const VerificationReport& rep) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  auto write_file = [&](const std::string& name, const std::string& body) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << body;
    if (!out) throw IoError("write failed: " + path);
  };
  write_file("verify_report.json", verification_json(rep).dump(2) + "\n");
  std::string ds = "delta,coupling_error\n";
  for (const SweepRow& r : rep.delta_sweep)
    ds += format_double(r.x) + "," + format_double(r.error) + "\n";
  write_file("delta_sweep.csv", ds);
  std::string ks = "k,unrolled_error\n";
  for (const SweepRow& r : rep.k_sweep)
    ks += format_double(r.x) + "," + format_double(r.error) + "\n";
  write_file("k_sweep.csv", ks);
}

}  // namespace bgl
