// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "bgl/errors.hpp"

namespace bgl {

// Row-major dense matrix, sized for the closed-form benchmark problems
// (a handful of rows, not BLAS territory).
struct SmallMatrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> a;

  SmallMatrix() = default;
  SmallMatrix(int64_t r, int64_t c) : rows(r), cols(c), a(static_cast<size_t>(r * c), 0.0) {}

  double& at(int64_t r, int64_t c) { return a[static_cast<size_t>(r * cols + c)]; }
  double at(int64_t r, int64_t c) const { return a[static_cast<size_t>(r * cols + c)]; }

  SmallMatrix transposed() const {
    SmallMatrix t(cols, rows);
    for (int64_t r = 0; r < rows; ++r)
      for (int64_t c = 0; c < cols; ++c) t.at(c, r) = at(r, c);
    return t;
  }
};

inline std::vector<double> matvec(const SmallMatrix& m, const std::vector<double>& x) {
  if (static_cast<int64_t>(x.size()) != m.cols) throw ShapeError("matvec size mismatch");
  std::vector<double> y(static_cast<size_t>(m.rows), 0.0);
  for (int64_t r = 0; r < m.rows; ++r) {
    double s = 0.0;
    for (int64_t c = 0; c < m.cols; ++c) s += m.at(r, c) * x[static_cast<size_t>(c)];
    y[static_cast<size_t>(r)] = s;
  }
  return y;
}

// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
// Failure to factor is the SPD check.
inline SmallMatrix cholesky_factor(const SmallMatrix& m) {
  if (m.rows != m.cols) throw ShapeError("cholesky needs a square matrix");
  const int64_t n = m.rows;
  SmallMatrix L(n, n);
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = 0; j <= i; ++j) {
      double s = m.at(i, j);
      for (int64_t k = 0; k < j; ++k) s -= L.at(i, k) * L.at(j, k);
      if (i == j) {
        if (!(s > 0.0)) throw NumericError("matrix is not positive definite");
        L.at(i, i) = std::sqrt(s);
      } else {
        L.at(i, j) = s / L.at(j, j);
      }
    }
  }
  return L;
}

// Solves (L L^T) x = b given the Cholesky factor.
inline std::vector<double> cholesky_solve(const SmallMatrix& L, const std::vector<double>& b) {
  const int64_t n = L.rows;
  if (static_cast<int64_t>(b.size()) != n) throw ShapeError("cholesky_solve size mismatch");
  std::vector<double> y(b);
  for (int64_t i = 0; i < n; ++i) {
    double s = y[static_cast<size_t>(i)];
    for (int64_t k = 0; k < i; ++k) s -= L.at(i, k) * y[static_cast<size_t>(k)];
    y[static_cast<size_t>(i)] = s / L.at(i, i);
  }
  for (int64_t i = n; i-- > 0;) {
    double s = y[static_cast<size_t>(i)];
    for (int64_t k = i + 1; k < n; ++k) s -= L.at(k, i) * y[static_cast<size_t>(k)];
    y[static_cast<size_t>(i)] = s / L.at(i, i);
  }
  return y;
}

// Eigenvalues of a symmetric matrix by classical Jacobi sweeps, returned in
// ascending order. Plenty for the single-digit sizes the benchmarks use.
inline std::vector<double> jacobi_eigenvalues(SmallMatrix m, int max_sweeps = 100) {
  if (m.rows != m.cols) throw ShapeError("jacobi needs a square matrix");
  const int64_t n = m.rows;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double off = 0.0;
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = i + 1; j < n; ++j) off += m.at(i, j) * m.at(i, j);
    if (off < 1e-24) break;
    for (int64_t p = 0; p < n; ++p) {
      for (int64_t q = p + 1; q < n; ++q) {
        const double apq = m.at(p, q);
        if (apq == 0.0) continue;
        const double theta = (m.at(q, q) - m.at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int64_t k = 0; k < n; ++k) {
          const double akp = m.at(k, p), akq = m.at(k, q);
          m.at(k, p) = c * akp - s * akq;
          m.at(k, q) = s * akp + c * akq;
        }
        for (int64_t k = 0; k < n; ++k) {
          const double apk = m.at(p, k), aqk = m.at(q, k);
          m.at(p, k) = c * apk - s * aqk;
          m.at(q, k) = s * apk + c * aqk;
        }
      }
    }
  }
  std::vector<double> eig(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) eig[static_cast<size_t>(i)] = m.at(i, i);
  std::sort(eig.begin(), eig.end());
  return eig;
}

}  // namespace bgl
