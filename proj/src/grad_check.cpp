// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/grad_check.hpp"

#include <cmath>

namespace bgl {

std::vector<double> fd_gradient(const ScalarFn& f, const ParameterVector& point, double h) {
  if (!(h > 0.0)) throw ShapeError("fd step must be positive");
  std::vector<double> flat = point.flatten();
  std::vector<double> grad(flat.size());
  for (size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + h;
    const double up = f(point.unflatten(flat));
    flat[i] = orig - h;
    const double down = f(point.unflatten(flat));
    flat[i] = orig;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

GradCheckResult grad_check(const ScalarFn& f, const ParameterVector& point,
                           const ParameterVector& analytic, double h) {
  if (!same_structure(point, analytic)) {
    throw ShapeError("gradient structure does not match the point");
  }
  const std::vector<double> fd = fd_gradient(f, point, h);
  const std::vector<double> ad = analytic.flatten();
  GradCheckResult r;
  for (size_t i = 0; i < fd.size(); ++i) {
    const double rel = std::fabs(ad[i] - fd[i]) / (std::fabs(ad[i]) + std::fabs(fd[i]) + 1e-12);
    if (rel > r.max_rel_err) {
      r.max_rel_err = rel;
      r.worst_index = static_cast<int64_t>(i);
      r.worst_ad = ad[i];
      r.worst_fd = fd[i];
    }
  }
  return r;
}

}  // namespace bgl
