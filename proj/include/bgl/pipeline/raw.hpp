// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

#include "bgl/tensor.hpp"

namespace bgl {

// Sensor noise model: shot variance grows linearly with the signal,
// read noise is signal-independent Gaussian.
struct NoiseParams {
  double shot_scale = 0.0;
  double read_sigma = 0.0;
};

// Constants of the inverted camera pipeline. identity() disables gamma and
// the color transform so packing tests can see straight through the chain.
struct UnprocessParams {
  double gamma = 2.2;
  std::array<double, 9> cam_from_rgb = {0.6, 0.3, 0.1, 0.2, 0.6, 0.2, 0.1, 0.3, 0.6};

  static UnprocessParams identity();
};

// Packed RGGB planes at half resolution plus the capture metadata needed to
// invert the exposure.
struct RawImage {
  Tensor packed;  // [4, H/2, W/2], channel order R, G1, G2, B
  double gain = 1.0;
  NoiseParams noise;
};

struct SynthesisResult {
  RawImage raw;
  Tensor reference;  // the clean input, kept as the long-exposure target
};

// clean [3,H,W] in [0,1] -> low-light raw: linearize (x^gamma), camera color
// transform, RGGB mosaic, multiply by gain, add shot + read noise, clamp at
// zero, pack. Bit-identical output for identical (clean, gain, noise, seed).
SynthesisResult unprocess_synthesize(const Tensor& clean, double gain, const NoiseParams& noise,
                                     uint64_t seed, const UnprocessParams& params = {});

// [1,H,W] mosaic <-> [4,H/2,W/2] planes; exact inverses of each other.
Tensor pack_bayer(const Tensor& mosaic);
Tensor unpack_bayer(const Tensor& packed);

// [3,H,W] -> [1,H,W] RGGB subsampling (R at even/even, B at odd/odd).
Tensor mosaic_rggb(const Tensor& rgb);

// Classic bilinear interpolation of the missing mosaic samples, reflected at
// the borders. The fixed front end the learned block is compared against.
Tensor bilinear_demosaic(const Tensor& mosaic);

}  // namespace bgl
