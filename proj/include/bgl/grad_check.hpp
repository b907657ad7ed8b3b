// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

#include "bgl/parameter_vector.hpp"

namespace bgl {

// Scalar function of a parameter vector, evaluated by building a fresh tape
// internally. Used both for validating reverse-mode gradients and as the
// numerical reference in higher-level checks.
using ScalarFn = std::function<double(const ParameterVector&)>;

struct GradCheckResult {
  // max_i |ad_i - fd_i| / (|ad_i| + |fd_i| + 1e-12)
  double max_rel_err = 0.0;
  // Flat coordinate where the maximum occurred.
  int64_t worst_index = -1;
  double worst_ad = 0.0;
  double worst_fd = 0.0;
};

// Central differences of `f` around `point` per coordinate, compared against
// `analytic` (usually the tape gradient), with step h.
GradCheckResult grad_check(const ScalarFn& f, const ParameterVector& point,
                           const ParameterVector& analytic, double h = 1e-5);

// Central-difference gradient of `f` at `point` as a flat vector.
std::vector<double> fd_gradient(const ScalarFn& f, const ParameterVector& point, double h = 1e-5);

}  // namespace bgl
