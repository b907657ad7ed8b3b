// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/benchmarks.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "bgl/errors.hpp"
#include "bgl/random.hpp"
#include "bgl/tensor_io.hpp"

namespace bgl {

namespace {

Tensor matrix_tensor(const SmallMatrix& m) {
  return Tensor({m.rows, m.cols}, m.a);
}

ParameterVector one_segment(const char* name, std::vector<double> v) {
  const int64_t len = static_cast<int64_t>(v.size());
  ParameterVector pv;
  pv.add(name, Tensor({len}, std::move(v)));
  return pv;
}

}  // namespace

QuadraticBilevel::QuadraticBilevel(SmallMatrix A, SmallMatrix B, std::vector<double> t,
                                   double lambda, std::vector<double> omega0,
                                   std::vector<double> theta0)
    : A_(std::move(A)),
      B_(std::move(B)),
      t_(std::move(t)),
      lambda_(lambda) {
  if (A_.rows != A_.cols) throw ShapeError("A must be square");
  if (B_.cols != A_.rows) throw ShapeError("B column count must match A");
  if (static_cast<int64_t>(t_.size()) != A_.rows) throw ShapeError("t length must match A");
  if (static_cast<int64_t>(omega0.size()) != B_.rows) throw ShapeError("omega0 length mismatch");
  if (static_cast<int64_t>(theta0.size()) != A_.rows) throw ShapeError("theta0 length mismatch");
  for (int64_t i = 0; i < A_.rows; ++i)
    for (int64_t j = 0; j < i; ++j)
      if (std::fabs(A_.at(i, j) - A_.at(j, i)) > 1e-12) throw ShapeError("A must be symmetric");
  Bt_ = B_.transposed();
  chol_ = cholesky_factor(A_);  // doubles as the positive-definiteness check
  omega0_ = one_segment("omega", std::move(omega0));
  theta0_ = one_segment("theta", std::move(theta0));
  A_tensor_ = matrix_tensor(A_);
  B_tensor_ = matrix_tensor(B_);
  Bt_tensor_ = matrix_tensor(Bt_);
  t_tensor_ = Tensor({static_cast<int64_t>(t_.size())}, t_);
}

Var QuadraticBilevel::upper_loss(Tape& tape, const ParamVars& omega,
                                 const ParamVars& theta) const {
  Var th = theta.at("theta");
  Var om = omega.at("omega");
  Var d = sub(th, tape.constant(t_tensor_));
  Var fit = mul_scalar(sum_all(mul(d, d)), 0.5);
  Var reg = mul_scalar(sum_all(mul(om, om)), 0.5 * lambda_);
  return add(fit, reg);
}

Var QuadraticBilevel::lower_loss(Tape& tape, const ParamVars& omega,
                                 const ParamVars& theta) const {
  Var th = reshape(theta.at("theta"), {n(), 1});
  Var om = reshape(omega.at("omega"), {m(), 1});
  Var a_th = matmul(tape.constant(A_tensor_), th);
  Var quad = mul_scalar(sum_all(mul(th, a_th)), 0.5);
  Var b_th = matmul(tape.constant(B_tensor_), th);
  Var cross = sum_all(mul(om, b_th));
  Var base = sub(quad, cross);
  Var extra = lower_extra(tape, omega, theta);
  return extra.valid() ? add(base, extra) : base;
}

std::vector<double> QuadraticBilevel::lower_minimizer(const std::vector<double>& omega) const {
  return cholesky_solve(chol_, matvec(Bt_, omega));
}

std::vector<double> QuadraticBilevel::analytic_hypergradient(
    const std::vector<double>& omega) const {
  // lambda*omega + B A^{-1} (theta*(omega) - t)
  std::vector<double> theta_star = lower_minimizer(omega);
  for (size_t i = 0; i < theta_star.size(); ++i) theta_star[i] -= t_[i];
  const std::vector<double> q = cholesky_solve(chol_, theta_star);
  std::vector<double> out = matvec(B_, q);
  for (int64_t i = 0; i < m(); ++i) out[static_cast<size_t>(i)] += lambda_ * omega[static_cast<size_t>(i)];
  return out;
}

std::vector<double> QuadraticBilevel::mixed_product(const std::vector<double>& /*theta*/,
                                                    const std::vector<double>& v) const {
  std::vector<double> out = matvec(B_, v);
  for (auto& x : out) x = -x;
  return out;
}

std::vector<double> QuadraticBilevel::grad_lower_theta(const std::vector<double>& omega,
                                                       const std::vector<double>& theta) const {
  std::vector<double> g = matvec(A_, theta);
  const std::vector<double> bo = matvec(Bt_, omega);
  for (size_t i = 0; i < g.size(); ++i) g[i] -= bo[i];
  return g;
}

std::vector<double> QuadraticBilevel::grad_lower_omega(const std::vector<double>& /*omega*/,
                                                       const std::vector<double>& theta) const {
  std::vector<double> g = matvec(B_, theta);
  for (auto& x : g) x = -x;
  return g;
}

std::vector<double> QuadraticBilevel::grad_upper_theta(const std::vector<double>& theta) const {
  std::vector<double> g(theta.size());
  for (size_t i = 0; i < theta.size(); ++i) g[i] = theta[i] - t_[i];
  return g;
}

std::vector<double> QuadraticBilevel::grad_upper_omega(const std::vector<double>& omega) const {
  std::vector<double> g(omega.size());
  for (size_t i = 0; i < omega.size(); ++i) g[i] = lambda_ * omega[i];
  return g;
}

CubicLowerBilevel::CubicLowerBilevel(SmallMatrix A, SmallMatrix B, std::vector<double> t,
                                     double lambda, double gamma, std::vector<double> omega0,
                                     std::vector<double> theta0)
    : QuadraticBilevel(std::move(A), std::move(B), std::move(t), lambda, std::move(omega0),
                       std::move(theta0)),
      gamma_(gamma) {}

Var CubicLowerBilevel::lower_extra(Tape& tape, const ParamVars& omega,
                                   const ParamVars& theta) const {
  if (gamma_ == 0.0) return Var{};
  Var th = reshape(theta.at("theta"), {n(), 1});
  Var om = reshape(omega.at("omega"), {m(), 1});
  Var bt_om = matmul(tape.constant(Bt_tensor_), om);
  Var th3 = mul(mul(th, th), th);
  return mul_scalar(sum_all(mul(bt_om, th3)), gamma_);
}

std::vector<double> CubicLowerBilevel::lower_minimizer(const std::vector<double>& omega) const {
  if (gamma_ != 0.0) throw NumericError("no closed-form lower minimizer with a cubic term");
  return QuadraticBilevel::lower_minimizer(omega);
}

std::vector<double> CubicLowerBilevel::analytic_hypergradient(
    const std::vector<double>& omega) const {
  if (gamma_ != 0.0) throw NumericError("no closed-form hypergradient with a cubic term");
  return QuadraticBilevel::analytic_hypergradient(omega);
}

std::vector<double> CubicLowerBilevel::mixed_product(const std::vector<double>& theta,
                                                     const std::vector<double>& v) const {
  std::vector<double> scaled(v.size());
  for (size_t i = 0; i < v.size(); ++i) {
    scaled[i] = (3.0 * gamma_ * theta[i] * theta[i] - 1.0) * v[i];
  }
  return matvec(B_, scaled);
}

std::vector<double> CubicLowerBilevel::grad_lower_theta_cubic(
    const std::vector<double>& omega, const std::vector<double>& theta) const {
  std::vector<double> g = grad_lower_theta(omega, theta);
  const std::vector<double> bo = matvec(Bt_, omega);
  for (size_t i = 0; i < g.size(); ++i) g[i] += 3.0 * gamma_ * bo[i] * theta[i] * theta[i];
  return g;
}

std::vector<double> CubicLowerBilevel::grad_lower_omega_cubic(
    const std::vector<double>& /*omega*/, const std::vector<double>& theta) const {
  std::vector<double> cube(theta.size());
  for (size_t i = 0; i < theta.size(); ++i) cube[i] = theta[i] * theta[i] * theta[i];
  std::vector<double> g = matvec(B_, cube);
  const std::vector<double> lin = matvec(B_, theta);
  for (size_t i = 0; i < g.size(); ++i) g[i] = gamma_ * g[i] - lin[i];
  return g;
}

namespace {

struct RandomParts {
  SmallMatrix A, B;
  std::vector<double> t, omega0, theta0;
};

RandomParts random_parts(int64_t m, int64_t n, uint64_t seed) {
  if (m < 1 || n < 1) throw ShapeError("benchmark dims must be positive");
  RandomStream rng(seed);
  SmallMatrix M(n, n);
  for (auto& x : M.a) x = rng.uniform(-1.0, 1.0);
  SmallMatrix A(n, n);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (int64_t k = 0; k < n; ++k) s += M.at(k, i) * M.at(k, j);
      A.at(i, j) = s + (i == j ? 1.0 : 0.0);
    }
  RandomParts p;
  p.A = std::move(A);
  p.B = SmallMatrix(m, n);
  for (auto& x : p.B.a) x = rng.uniform(-1.0, 1.0);
  p.t.resize(static_cast<size_t>(n));
  for (auto& x : p.t) x = rng.uniform(-1.0, 1.0);
  p.omega0.resize(static_cast<size_t>(m));
  for (auto& x : p.omega0) x = rng.uniform(-1.0, 1.0);
  p.theta0.resize(static_cast<size_t>(n));
  for (auto& x : p.theta0) x = rng.uniform(-1.0, 1.0);
  return p;
}

}  // namespace

QuadraticBilevel make_quadratic(int64_t m, int64_t n, uint64_t seed, double lambda) {
  RandomParts p = random_parts(m, n, seed);
  return QuadraticBilevel(std::move(p.A), std::move(p.B), std::move(p.t), lambda,
                          std::move(p.omega0), std::move(p.theta0));
}

CubicLowerBilevel make_cubic(int64_t m, int64_t n, uint64_t seed, double lambda, double gamma) {
  RandomParts p = random_parts(m, n, seed);
  return CubicLowerBilevel(std::move(p.A), std::move(p.B), std::move(p.t), lambda, gamma,
                           std::move(p.omega0), std::move(p.theta0));
}

namespace {

Tensor mat_tensor(const SmallMatrix& m) { return Tensor({m.rows, m.cols}, m.a); }
Tensor vec_tensor(const std::vector<double>& v) {
  return Tensor({static_cast<int64_t>(v.size())}, v);
}

SmallMatrix mat_from(const Tensor& t) {
  if (t.shape().size() != 2) throw IoError("fixture matrix must be rank 2");
  SmallMatrix m(t.dim(0), t.dim(1));
  m.a = t.values();
  return m;
}

struct FixtureParts {
  SmallMatrix A, B;
  std::vector<double> t, omega0, theta0;
  double lambda = 0.0;
  double gamma = 0.0;
};

void save_parts(const std::string& dir, const QuadraticBilevel& p, double gamma) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create fixture directory " + dir + ": " + ec.message());
  const std::filesystem::path base(dir);
  save_tensor((base / "A.bglt").string(), mat_tensor(p.A()));
  save_tensor((base / "B.bglt").string(), mat_tensor(p.B()));
  save_tensor((base / "t.bglt").string(), vec_tensor(p.t()));
  save_tensor((base / "omega0.bglt").string(), p.omega_init().tensor("omega"));
  save_tensor((base / "theta0.bglt").string(), p.theta_init().tensor("theta"));
  nlohmann::json manifest{{"m", p.m()}, {"n", p.n()}, {"lambda", p.lambda()}, {"gamma", gamma}};
  std::ofstream out(base / "manifest.json");
  if (!out) throw IoError("cannot write fixture manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

FixtureParts load_parts(const std::string& dir) {
  const std::filesystem::path base(dir);
  std::ifstream in(base / "manifest.json");
  if (!in) throw IoError("cannot open fixture manifest in " + dir);
  nlohmann::json manifest;
  try {
    in >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad fixture manifest in " + dir + ": " + e.what());
  }
  FixtureParts parts;
  parts.lambda = manifest.at("lambda").get<double>();
  parts.gamma = manifest.value("gamma", 0.0);
  parts.A = mat_from(load_tensor((base / "A.bglt").string()));
  parts.B = mat_from(load_tensor((base / "B.bglt").string()));
  parts.t = load_tensor((base / "t.bglt").string()).values();
  parts.omega0 = load_tensor((base / "omega0.bglt").string()).values();
  parts.theta0 = load_tensor((base / "theta0.bglt").string()).values();
  return parts;
}

}  // namespace

void save_quadratic(const std::string& dir, const QuadraticBilevel& p) {
  save_parts(dir, p, 0.0);
}

void save_cubic(const std::string& dir, const CubicLowerBilevel& p) {
  save_parts(dir, p, p.gamma());
}

QuadraticBilevel load_quadratic(const std::string& dir) {
  FixtureParts parts = load_parts(dir);
  if (parts.gamma != 0.0) throw IoError("fixture in " + dir + " has a cubic term");
  return QuadraticBilevel(std::move(parts.A), std::move(parts.B), std::move(parts.t),
                          parts.lambda, std::move(parts.omega0), std::move(parts.theta0));
}

CubicLowerBilevel load_cubic(const std::string& dir) {
  FixtureParts parts = load_parts(dir);
  return CubicLowerBilevel(std::move(parts.A), std::move(parts.B), std::move(parts.t),
                           parts.lambda, parts.gamma, std::move(parts.omega0),
                           std::move(parts.theta0));
}

}  // namespace bgl
