// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace bgl {

// Shape or argument contract violation (mismatched dims, bad axis, ...).
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Misuse of the tape lifecycle: backward on a consumed tape, non-scalar
// output, vars from a foreign tape.
struct TapeError : std::logic_error {
  using std::logic_error::logic_error;
};

// NaN or infinity where a finite value is required.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Conjugate-gradient solve did not reach tolerance (or hit an indefinite
// direction). Carries the last relative residual for diagnostics.
struct CgError : NumericError {
  CgError(const std::string& what, double residual, int iterations)
      : NumericError(what), last_residual(residual), iters(iterations) {}
  double last_residual;
  int iters;
};

// Oracle invoked past its configured cost budget (dimension or step count).
struct BudgetError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace bgl
