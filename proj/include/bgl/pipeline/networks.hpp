// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bgl/parameter_vector.hpp"

namespace bgl {

// Channel widths of the encoder-decoder front end. The decoder mirrors the
// encoder, so these four numbers fix every layer shape.
struct GbWidths {
  int64_t enc1 = 8;
  int64_t enc2 = 12;
  int64_t enc3 = 16;
  int64_t bottleneck = 16;
};

struct EnhancerWidths {
  int64_t hidden = 16;
};

// Uniform fan-in init for the 3x3 conv stacks, biases zero.
ParameterVector init_generative_block(const GbWidths& widths, uint64_t seed);
ParameterVector init_enhancer(const EnhancerWidths& widths, uint64_t seed);
ParameterVector init_denoise_head(const EnhancerWidths& widths, uint64_t seed);

// Packed raw [N,4,h,w] -> RGB [N,3,2h,2w] in (0,1). Three conv+relu encoder
// levels with 2x average-pool downsampling, a conv bottleneck, mirrored
// nearest-upsample decoder levels with skip concatenation, and a final
// upsample + conv + sigmoid that restores full resolution. h and w must be
// divisible by 8.
Var generative_block_forward(Tape& tape, const ParamVars& omega, Var packed);

struct EnhancerOut {
  Var illumination;  // s in [s_min, 1]
  Var enhanced;      // x / s
};

// Illumination estimator: s = sigmoid(conv3(relu(conv2(relu(conv1(x))))) + x)
// clamped to [s_min, 1], then y = x / s. Input [N,3,H,W] with values >= 0.
EnhancerOut enhancer_forward(Tape& tape, const ParamVars& theta, Var x, double s_min);

// y = x / s, the brightening step alone.
Var apply_illumination(Tape& tape, Var x, Var s);

// Plain three-conv regression head, sigmoid output.
Var denoise_head_forward(Tape& tape, const ParamVars& theta, Var x);

// Mean absolute difference.
Var loss_upper_l1(Tape& tape, Var pred, Var ref);

// w_f * mean((s - maxchan(x))^2) + w_s * TV(s), where maxchan is the
// per-pixel channel maximum broadcast back to 3 channels and TV is the mean
// absolute forward difference over both spatial directions.
Var loss_lower_illum(Tape& tape, Var x, Var s, double w_f, double w_s);

}  // namespace bgl
