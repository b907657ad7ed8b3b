// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
//
// Self-contained invariant suite behind the `verify` command: oracle
// agreement on the quadratic family, one-step exactness, difference-quotient
// order on the cubic family, coupling direction and scaling invariants, and
// exact evaluation counts. Estimator entry points are injectable so a
// deliberately broken double can prove the suite actually rejects.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bgl/benchmarks.hpp"
#include "bgl/estimators.hpp"
#include "bgl/harness/config.hpp"

namespace bgl {

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SweepRow {
  double x = 0.0;
  double error = 0.0;
};

struct VerificationHooks {
  std::function<HypergradientReport(const BilevelProblem&, const ParameterVector&,
                                    const ParameterVector&, const EstimatorConfig&, EvalCounter&)>
      tbgl;
  std::function<CouplingResult(const BilevelProblem&, const ParameterVector&,
                               const ParameterVector&, const EstimatorConfig&, EvalCounter&)>
      ibgl;
};

struct VerificationReport {
  std::vector<CheckResult> checks;
  std::vector<SweepRow> delta_sweep;  // probe width vs coupling error, cubic family
  std::vector<SweepRow> k_sweep;      // unroll depth vs oracle error, quadratic family

  bool all_pass() const;
  std::vector<std::string> failing() const;
};

VerificationReport run_verification(const VerifyOptions& opts,
                                    const VerificationHooks& hooks = {});

nlohmann::json verification_json(const VerificationReport& rep);

// Writes verify_report.json, delta_sweep.csv and k_sweep.csv under dir.
void write_verification_outputs(const std::string& dir, const VerificationReport& rep);

}  // namespace bgl
