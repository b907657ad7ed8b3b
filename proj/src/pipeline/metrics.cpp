// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/pipeline/metrics.hpp"

#include <cmath>
#include <limits>

#include "bgl/errors.hpp"

namespace bgl {

namespace {

void check_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (a.shape() != b.shape()) throw ShapeError(std::string(what) + ": shape mismatch");
}

double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

// Channel count and plane geometry for [H,W], [C,H,W] or [N==1 folded in C].
struct Planes {
  int64_t channels, h, w;
};

Planes plane_layout(const Tensor& t, const char* what) {
  const Shape& s = t.shape();
  if (s.size() == 2) return {1, s[0], s[1]};
  if (s.size() == 3) return {s[0], s[1], s[2]};
  throw ShapeError(std::string(what) + " expects rank 2 or 3 images");
}

}  // namespace

double psnr(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "psnr");
  const auto& av = a.values();
  const auto& bv = b.values();
  double se = 0.0;
  for (size_t i = 0; i < av.size(); ++i) {
    const double d = clamp01(av[i]) - clamp01(bv[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(av.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

double mean_abs_diff(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mean_abs_diff");
  const auto& av = a.values();
  const auto& bv = b.values();
  double s = 0.0;
  for (size_t i = 0; i < av.size(); ++i) s += std::fabs(av[i] - bv[i]);
  return s / static_cast<double>(av.size());
}

double ssim(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "ssim");
  const Planes p = plane_layout(a, "ssim");
  constexpr int64_t kWin = 11;
  constexpr double kSigma = 1.5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  if (p.h < kWin || p.w < kWin) throw ShapeError("ssim: image smaller than 11x11 window");

  // Separable Gaussian window, normalized to sum 1.
  double g[kWin];
  double gsum = 0.0;
  for (int64_t i = 0; i < kWin; ++i) {
    const double d = static_cast<double>(i - kWin / 2);
    g[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    gsum += g[i];
  }
  for (double& x : g) x /= gsum;

  const auto& av = a.values();
  const auto& bv = b.values();
  const size_t plane = static_cast<size_t>(p.h * p.w);

  double total = 0.0;
  int64_t count = 0;
  for (int64_t c = 0; c < p.channels; ++c) {
    const size_t base = static_cast<size_t>(c) * plane;
    for (int64_t y0 = 0; y0 + kWin <= p.h; ++y0) {
      for (int64_t x0 = 0; x0 + kWin <= p.w; ++x0) {
        double ma = 0.0, mb = 0.0, maa = 0.0, mbb = 0.0, mab = 0.0;
        for (int64_t dy = 0; dy < kWin; ++dy) {
          for (int64_t dx = 0; dx < kWin; ++dx) {
            const double wgt = g[dy] * g[dx];
            const size_t idx = base + static_cast<size_t>((y0 + dy) * p.w + (x0 + dx));
            const double xa = clamp01(av[idx]);
            const double xb = clamp01(bv[idx]);
            ma += wgt * xa;
            mb += wgt * xb;
            maa += wgt * xa * xa;
            mbb += wgt * xb * xb;
            mab += wgt * xa * xb;
          }
        }
        const double va = maa - ma * ma;
        const double vb = mbb - mb * mb;
        const double cov = mab - ma * mb;
        const double score = ((2.0 * ma * mb + kC1) * (2.0 * cov + kC2)) /
                             ((ma * ma + mb * mb + kC1) * (va + vb + kC2));
        total += score;
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

}  // namespace bgl
