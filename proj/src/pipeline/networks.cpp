// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/pipeline/networks.hpp"

#include <cmath>
#include <string>

#include "bgl/errors.hpp"
#include "bgl/random.hpp"

namespace bgl {

namespace {

void add_conv(ParameterVector& pv, const std::string& name, int64_t out_ch, int64_t in_ch,
              RandomStream& rng) {
  const double a = std::sqrt(6.0 / static_cast<double>(in_ch * 9));
  std::vector<double> w(static_cast<size_t>(out_ch * in_ch * 9));
  for (auto& x : w) x = rng.uniform(-a, a);
  pv.add(name + ".w", Tensor({out_ch, in_ch, 3, 3}, std::move(w)));
  pv.add(name + ".b", Tensor::zeros({out_ch}));
}

Var conv3x3(const ParamVars& p, const std::string& name, Var x) {
  return conv2d(x, p.at(name + ".w"), p.at(name + ".b"), 1, 1);
}

void check_image_input(const Tape& tape, Var x, int64_t channels, const char* what) {
  const Shape& s = tape.value(x).shape();
  if (s.size() != 4 || s[1] != channels) {
    throw ShapeError(std::string(what) + " expects input [N," + std::to_string(channels) +
                     ",H,W]");
  }
}

}  // namespace

ParameterVector init_generative_block(const GbWidths& w, uint64_t seed) {
  if (w.enc1 < 1 || w.enc2 < 1 || w.enc3 < 1 || w.bottleneck < 1) {
    throw ConfigError("generative block widths must be >= 1");
  }
  RandomStream rng(seed);
  ParameterVector pv;
  add_conv(pv, "enc1", w.enc1, 4, rng);
  add_conv(pv, "enc2", w.enc2, w.enc1, rng);
  add_conv(pv, "enc3", w.enc3, w.enc2, rng);
  add_conv(pv, "bott", w.bottleneck, w.enc3, rng);
  add_conv(pv, "dec3", w.enc3, w.bottleneck + w.enc3, rng);
  add_conv(pv, "dec2", w.enc2, w.enc3 + w.enc2, rng);
  add_conv(pv, "dec1", w.enc1, w.enc2 + w.enc1, rng);
  add_conv(pv, "out", 3, w.enc1, rng);
  return pv;
}

ParameterVector init_enhancer(const EnhancerWidths& w, uint64_t seed) {
  if (w.hidden < 1) throw ConfigError("enhancer width must be >= 1");
  RandomStream rng(seed);
  ParameterVector pv;
  add_conv(pv, "c1", w.hidden, 3, rng);
  add_conv(pv, "c2", w.hidden, w.hidden, rng);
  add_conv(pv, "c3", 3, w.hidden, rng);
  return pv;
}

ParameterVector init_denoise_head(const EnhancerWidths& w, uint64_t seed) {
  if (w.hidden < 1) throw ConfigError("denoise head width must be >= 1");
  RandomStream rng(seed);
  ParameterVector pv;
  add_conv(pv, "c1", w.hidden, 3, rng);
  add_conv(pv, "c2", w.hidden, w.hidden, rng);
  add_conv(pv, "c3", 3, w.hidden, rng);
  return pv;
}

Var generative_block_forward(Tape& tape, const ParamVars& omega, Var packed) {
  check_image_input(tape, packed, 4, "generative block");
  const Shape& s = tape.value(packed).shape();
  if (s[2] % 8 != 0 || s[3] % 8 != 0) {
    throw ShapeError("generative block needs packed dims divisible by 8");
  }
  Var e1 = relu(conv3x3(omega, "enc1", packed));
  Var e2 = relu(conv3x3(omega, "enc2", avg_pool2(e1)));
  Var e3 = relu(conv3x3(omega, "enc3", avg_pool2(e2)));
  Var b = relu(conv3x3(omega, "bott", avg_pool2(e3)));
  Var d3 = relu(conv3x3(omega, "dec3", concat({upsample2(b), e3}, 1)));
  Var d2 = relu(conv3x3(omega, "dec2", concat({upsample2(d3), e2}, 1)));
  Var d1 = relu(conv3x3(omega, "dec1", concat({upsample2(d2), e1}, 1)));
  return sigmoid(conv3x3(omega, "out", upsample2(d1)));
}

EnhancerOut enhancer_forward(Tape& tape, const ParamVars& theta, Var x, double s_min) {
  check_image_input(tape, x, 3, "enhancer");
  if (!(s_min > 0.0 && s_min < 1.0)) throw ConfigError("s_min must lie in (0,1)");
  Var h1 = relu(conv3x3(theta, "c1", x));
  Var h2 = relu(conv3x3(theta, "c2", h1));
  Var t = conv3x3(theta, "c3", h2);
  Var s = clamp(sigmoid(add(t, x)), s_min, 1.0);
  EnhancerOut out;
  out.illumination = s;
  out.enhanced = apply_illumination(tape, x, s);
  return out;
}

Var apply_illumination(Tape& tape, Var x, Var s) {
  (void)tape;
  return div(x, s);
}

Var denoise_head_forward(Tape& tape, const ParamVars& theta, Var x) {
  check_image_input(tape, x, 3, "denoise head");
  Var h1 = relu(conv3x3(theta, "c1", x));
  Var h2 = relu(conv3x3(theta, "c2", h1));
  return sigmoid(conv3x3(theta, "c3", h2));
}

Var loss_upper_l1(Tape& tape, Var pred, Var ref) {
  (void)tape;
  return mean_all(abs(sub(pred, ref)));
}

Var loss_lower_illum(Tape& tape, Var x, Var s, double w_f, double w_s) {
  if (w_f < 0.0 || w_s < 0.0) throw ConfigError("loss weights must be >= 0");
  const Shape& sh = tape.value(s).shape();
  if (sh.size() != 4 || sh[1] != 3) throw ShapeError("illumination loss expects [N,3,H,W]");
  const int64_t n = sh[0], h = sh[2], w = sh[3];
  if (h < 2 || w < 2) throw ShapeError("illumination loss needs at least 2x2 images");

  Var mx = reduce_max(x, 1);  // [N,1,H,W]
  Var mx3 = concat({mx, mx, mx}, 1);
  Var diff = sub(s, mx3);
  Var fidelity = mean_all(mul(diff, diff));

  Var dh = abs(sub(slice(s, {0, 0, 1, 0}, {n, 3, h - 1, w}),
                   slice(s, {0, 0, 0, 0}, {n, 3, h - 1, w})));
  Var dw = abs(sub(slice(s, {0, 0, 0, 1}, {n, 3, h, w - 1}),
                   slice(s, {0, 0, 0, 0}, {n, 3, h, w - 1})));
  const double count = static_cast<double>(n * 3 * (h - 1) * w + n * 3 * h * (w - 1));
  Var tv = mul_scalar(add(sum_all(dh), sum_all(dw)), 1.0 / count);

  return add(mul_scalar(fidelity, w_f), mul_scalar(tv, w_s));
}

}  // namespace bgl
