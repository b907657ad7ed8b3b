// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bgl/tensor.hpp"

namespace bgl {

// Peak signal-to-noise ratio against peak 1.0, computed on inputs clamped to
// [0,1]. Identical images return +infinity.
double psnr(const Tensor& a, const Tensor& b);

// Mean structural similarity over all fully supported 11x11 windows
// (Gaussian weights, sigma 1.5; C1 = 0.01^2, C2 = 0.03^2), averaged across
// channels. Inputs are clamped to [0,1]; spatial dims must be >= 11.
double ssim(const Tensor& a, const Tensor& b);

// Mean absolute difference, the tabulated L1 metric.
double mean_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace bgl
