// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/pipeline/raw.hpp"

#include <cmath>

#include "bgl/errors.hpp"
#include "bgl/random.hpp"

namespace bgl {

namespace {

void check_rgb(const Tensor& t, const char* what) {
  if (t.shape().size() != 3 || t.dim(0) != 3) {
    throw ShapeError(std::string(what) + " must have shape [3,H,W]");
  }
}

void check_even_hw(int64_t h, int64_t w, const char* what) {
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError(std::string(what) + " needs even height and width");
  }
}

}  // namespace

UnprocessParams UnprocessParams::identity() {
  UnprocessParams p;
  p.gamma = 1.0;
  p.cam_from_rgb = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  return p;
}

Tensor mosaic_rggb(const Tensor& rgb) {
  check_rgb(rgb, "mosaic input");
  const int64_t h = rgb.dim(1), w = rgb.dim(2);
  check_even_hw(h, w, "mosaic input");
  const auto& v = rgb.values();
  std::vector<double> out(static_cast<size_t>(h * w));
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      int64_t c;
      if (y % 2 == 0) {
        c = x % 2 == 0 ? 0 : 1;
      } else {
        c = x % 2 == 0 ? 1 : 2;
      }
      out[static_cast<size_t>(y * w + x)] = v[static_cast<size_t>((c * h + y) * w + x)];
    }
  }
  return Tensor({1, h, w}, std::move(out));
}

Tensor pack_bayer(const Tensor& mosaic) {
  if (mosaic.shape().size() != 3 || mosaic.dim(0) != 1) {
    throw ShapeError("pack_bayer expects shape [1,H,W]");
  }
  const int64_t h = mosaic.dim(1), w = mosaic.dim(2);
  check_even_hw(h, w, "pack_bayer input");
  const int64_t hh = h / 2, hw = w / 2;
  const auto& v = mosaic.values();
  std::vector<double> out(static_cast<size_t>(4 * hh * hw));
  for (int64_t i = 0; i < hh; ++i) {
    for (int64_t j = 0; j < hw; ++j) {
      const int64_t y = 2 * i, x = 2 * j;
      out[static_cast<size_t>((0 * hh + i) * hw + j)] = v[static_cast<size_t>(y * w + x)];
      out[static_cast<size_t>((1 * hh + i) * hw + j)] = v[static_cast<size_t>(y * w + x + 1)];
      out[static_cast<size_t>((2 * hh + i) * hw + j)] = v[static_cast<size_t>((y + 1) * w + x)];
      out[static_cast<size_t>((3 * hh + i) * hw + j)] =
          v[static_cast<size_t>((y + 1) * w + x + 1)];
    }
  }
  return Tensor({4, hh, hw}, std::move(out));
}

Tensor unpack_bayer(const Tensor& packed) {
  if (packed.shape().size() != 3 || packed.dim(0) != 4) {
    throw ShapeError("unpack_bayer expects shape [4,H/2,W/2]");
  }
  const int64_t hh = packed.dim(1), hw = packed.dim(2);
  const int64_t h = 2 * hh, w = 2 * hw;
  const auto& v = packed.values();
  std::vector<double> out(static_cast<size_t>(h * w));
  for (int64_t i = 0; i < hh; ++i) {
    for (int64_t j = 0; j < hw; ++j) {
      const int64_t y = 2 * i, x = 2 * j;
      out[static_cast<size_t>(y * w + x)] = v[static_cast<size_t>((0 * hh + i) * hw + j)];
      out[static_cast<size_t>(y * w + x + 1)] = v[static_cast<size_t>((1 * hh + i) * hw + j)];
      out[static_cast<size_t>((y + 1) * w + x)] = v[static_cast<size_t>((2 * hh + i) * hw + j)];
      out[static_cast<size_t>((y + 1) * w + x + 1)] =
          v[static_cast<size_t>((3 * hh + i) * hw + j)];
    }
  }
  return Tensor({1, h, w}, std::move(out));
}

SynthesisResult unprocess_synthesize(const Tensor& clean, double gain, const NoiseParams& noise,
                                     uint64_t seed, const UnprocessParams& params) {
  check_rgb(clean, "clean image");
  const int64_t h = clean.dim(1), w = clean.dim(2);
  check_even_hw(h, w, "clean image");
  if (!(gain > 0.0 && gain <= 1.0)) throw NumericError("gain must lie in (0,1]");
  if (noise.shot_scale < 0.0 || noise.read_sigma < 0.0) {
    throw NumericError("noise parameters must be nonnegative");
  }
  for (double x : clean.values()) {
    if (!(x >= 0.0 && x <= 1.0)) throw NumericError("clean image values must lie in [0,1]");
  }

  // Undo the display gamma, then move to camera color space.
  const auto& v = clean.values();
  std::vector<double> lin(v.size());
  if (params.gamma == 1.0) {
    lin = v;
  } else {
    for (size_t i = 0; i < v.size(); ++i) lin[i] = std::pow(v[i], params.gamma);
  }
  const size_t plane = static_cast<size_t>(h * w);
  std::vector<double> cam(v.size());
  const auto& m = params.cam_from_rgb;
  for (size_t p = 0; p < plane; ++p) {
    const double r = lin[p], g = lin[plane + p], b = lin[2 * plane + p];
    cam[p] = m[0] * r + m[1] * g + m[2] * b;
    cam[plane + p] = m[3] * r + m[4] * g + m[5] * b;
    cam[2 * plane + p] = m[6] * r + m[7] * g + m[8] * b;
  }

  Tensor mosaic = mosaic_rggb(Tensor({3, h, w}, std::move(cam)));

  RandomStream rng(seed);
  std::vector<double> noisy = mosaic.values();
  for (double& x : noisy) {
    const double signal = x * gain;
    const double shot_sd = std::sqrt(noise.shot_scale * std::max(signal, 0.0));
    double val = signal + shot_sd * rng.normal() + noise.read_sigma * rng.normal();
    if (val < 0.0) val = 0.0;
    x = val;
  }

  SynthesisResult out;
  out.raw.packed = pack_bayer(Tensor({1, h, w}, std::move(noisy)));
  out.raw.gain = gain;
  out.raw.noise = noise;
  out.reference = clean;
  return out;
}

Tensor bilinear_demosaic(const Tensor& mosaic) {
  if (mosaic.shape().size() != 3 || mosaic.dim(0) != 1) {
    throw ShapeError("bilinear_demosaic expects shape [1,H,W]");
  }
  const int64_t h = mosaic.dim(1), w = mosaic.dim(2);
  check_even_hw(h, w, "demosaic input");
  const auto& v = mosaic.values();

  auto reflect = [](int64_t i, int64_t n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  };
  auto at = [&](int64_t y, int64_t x) {
    return v[static_cast<size_t>(reflect(y, h) * w + reflect(x, w))];
  };
  auto cross = [&](int64_t y, int64_t x) {
    return 0.25 * (at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1));
  };
  auto horiz = [&](int64_t y, int64_t x) { return 0.5 * (at(y, x - 1) + at(y, x + 1)); };
  auto vert = [&](int64_t y, int64_t x) { return 0.5 * (at(y - 1, x) + at(y + 1, x)); };
  auto diag = [&](int64_t y, int64_t x) {
    return 0.25 * (at(y - 1, x - 1) + at(y - 1, x + 1) + at(y + 1, x - 1) + at(y + 1, x + 1));
  };

  std::vector<double> out(static_cast<size_t>(3 * h * w));
  const size_t plane = static_cast<size_t>(h * w);
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      double r, g, b;
      const bool even_row = y % 2 == 0, even_col = x % 2 == 0;
      if (even_row && even_col) {  // red site
        r = at(y, x);
        g = cross(y, x);
        b = diag(y, x);
      } else if (even_row) {  // green site on a red row
        r = horiz(y, x);
        g = at(y, x);
        b = vert(y, x);
      } else if (even_col) {  // green site on a blue row
        r = vert(y, x);
        g = at(y, x);
        b = horiz(y, x);
      } else {  // blue site
        r = diag(y, x);
        g = cross(y, x);
        b = at(y, x);
      }
      const size_t p = static_cast<size_t>(y * w + x);
      out[p] = r;
      out[plane + p] = g;
      out[2 * plane + p] = b;
    }
  }
  return Tensor({3, h, w}, std::move(out));
}

}  // namespace bgl
