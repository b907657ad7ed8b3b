// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/bilevel.hpp"

#include <cmath>

#include "bgl/report_json.hpp"

namespace bgl {

EvalCounter& EvalCounter::operator+=(const EvalCounter& o) {
  lf_grad_evals += o.lf_grad_evals;
  lg_grad_evals += o.lg_grad_evals;
  lower_updates += o.lower_updates;
  outer_updates += o.outer_updates;
  return *this;
}

namespace {

double vec_norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double HypergradientReport::total_norm() const { return vec_norm(total); }
double HypergradientReport::direct_norm() const { return vec_norm(direct_term); }
double HypergradientReport::coupling_norm() const { return vec_norm(coupling_term); }

nlohmann::json counts_to_json(const EvalCounter& counts) {
  return nlohmann::json{{"lf_grad_evals", counts.lf_grad_evals},
                        {"lg_grad_evals", counts.lg_grad_evals},
                        {"lower_updates", counts.lower_updates},
                        {"outer_updates", counts.outer_updates}};
}

nlohmann::json report_to_json(const HypergradientReport& rep) {
  nlohmann::json flags = nlohmann::json::array();
  if (rep.degenerate_coupling) flags.push_back("degenerate_coupling");
  return nlohmann::json{
      {"total_norm", rep.total_norm()},
      {"direct_norm", rep.direct_norm()},
      {"coupling_norm", rep.coupling_norm()},
      {"lower_grad_norm", rep.lower_grad_norm},
      {"flags", flags},
      {"eval_counts", counts_to_json(rep.eval_counts)},
  };
}

GradEval eval_loss_grad(const BilevelProblem& problem, LossKind kind,
                        const ParameterVector& omega, const ParameterVector& theta,
                        WrtBlocks wrt, EvalCounter* counter) {
  const bool want_omega = wrt != WrtBlocks::ThetaOnly;
  const bool want_theta = wrt != WrtBlocks::OmegaOnly;

  Tape tape;
  ParamVars ov = register_params(tape, omega, want_omega);
  ParamVars tv = register_params(tape, theta, want_theta);
  const Var loss = kind == LossKind::Upper ? problem.upper_loss(tape, ov, tv)
                                           : problem.lower_loss(tape, ov, tv);
  GradEval out;
  out.value = tape.value(loss).item();
  if (!std::isfinite(out.value)) {
    throw NumericError(kind == LossKind::Upper ? "non-finite upper loss"
                                               : "non-finite lower loss");
  }
  auto grads = tape.backward(loss);
  if (want_omega) {
    out.omega_grad = collect_grads(ov, grads);
    if (!all_finite(*out.omega_grad)) throw NumericError("non-finite omega gradient");
  }
  if (want_theta) {
    out.theta_grad = collect_grads(tv, grads);
    if (!all_finite(*out.theta_grad)) throw NumericError("non-finite theta gradient");
  }
  if (counter) {
    auto& n = kind == LossKind::Upper ? counter->lf_grad_evals : counter->lg_grad_evals;
    n += static_cast<uint64_t>(want_omega) + static_cast<uint64_t>(want_theta);
  }
  return out;
}

double eval_loss_value(const BilevelProblem& problem, LossKind kind,
                       const ParameterVector& omega, const ParameterVector& theta) {
  Tape tape;
  ParamVars ov = register_params(tape, omega, false);
  ParamVars tv = register_params(tape, theta, false);
  const Var loss = kind == LossKind::Upper ? problem.upper_loss(tape, ov, tv)
                                           : problem.lower_loss(tape, ov, tv);
  const double v = tape.value(loss).item();
  if (!std::isfinite(v)) throw NumericError("non-finite loss value");
  return v;
}

}  // namespace bgl
