// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/tape.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace bgl {

namespace {

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw TapeError("vars belong to different tapes");
  return *a.tape;
}

void require(bool cond, const char* msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Tape core

void Tape::check_var(Var v) const {
  if (v.tape != this) throw TapeError("var does not belong to this tape");
  if (consumed_) throw TapeError("tape already consumed by backward");
  if (v.id < 0 || v.id >= static_cast<int32_t>(nodes_.size())) throw TapeError("invalid var id");
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (consumed_) throw TapeError("tape already consumed by backward");
  Node n;
  n.value = std::move(value);
  n.needs_grad = requires_grad;
  n.is_leaf = true;
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int32_t>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::vector<int32_t> inputs, BackwardFn fn) {
  if (consumed_) throw TapeError("tape already consumed by backward");
  Node n;
  n.value = std::move(value);
  bool needs = false;
  for (int32_t id : inputs) needs = needs || nodes_[id].needs_grad;
  n.inputs = std::move(inputs);
  n.needs_grad = needs;
  if (needs) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int32_t>(nodes_.size() - 1)};
}

const Tensor& Tape::value(Var v) const {
  check_var(v);
  return nodes_[v.id].value;
}

bool Tape::requires_grad(Var v) const {
  check_var(v);
  return nodes_[v.id].requires_grad;
}

const Tensor& BackwardCtx::out() const { return tape_.nodes_[node_].value; }

const double* BackwardCtx::gout() const { return tape_.grads_[node_].data(); }

const Tensor& BackwardCtx::in_val(size_t k) const {
  return tape_.nodes_[tape_.nodes_[node_].inputs[k]].value;
}

double* BackwardCtx::gin(size_t k) {
  const int32_t id = tape_.nodes_[node_].inputs[k];
  const auto& in = tape_.nodes_[id];
  if (!in.needs_grad) return nullptr;
  auto& buf = tape_.grads_[id];
  if (buf.empty()) buf.assign(static_cast<size_t>(in.value.numel()), 0.0);
  return buf.data();
}

std::unordered_map<int32_t, Tensor> Tape::backward(Var output) {
  check_var(output);
  if (nodes_[output.id].value.numel() != 1) {
    throw TapeError("backward requires a one-element output");
  }
  grads_.assign(nodes_.size(), {});
  grads_[output.id].assign(1, 1.0);

  for (int32_t id = output.id; id >= 0; --id) {
    Node& n = nodes_[id];
    if (grads_[id].empty() || !n.backward) continue;
    BackwardCtx ctx(*this, id);
    n.backward(ctx);
  }

  std::unordered_map<int32_t, Tensor> result;
  for (int32_t id = 0; id < static_cast<int32_t>(nodes_.size()); ++id) {
    Node& n = nodes_[id];
    if (!n.is_leaf || !n.requires_grad) continue;
    if (grads_[id].empty()) grads_[id].assign(static_cast<size_t>(n.value.numel()), 0.0);
    result.emplace(id, Tensor(n.value.shape(), std::move(grads_[id])));
  }
  nodes_.clear();
  grads_.clear();
  consumed_ = true;
  return result;
}

// ---------------------------------------------------------------------------
// Elementwise binary ops

namespace {

enum class BinOp { Add, Sub, Mul, Div, SafeDiv };

Var binary(Var a, Var b, BinOp op, double floor = 0.0) {
  Tape& t = same_tape(a, b);
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  const bool a_scalar = av.numel() == 1;
  const bool b_scalar = bv.numel() == 1;
  if (!av.same_shape(bv) && !a_scalar && !b_scalar) {
    throw ShapeError("elementwise shapes " + shape_str(av.shape()) + " vs " +
                     shape_str(bv.shape()));
  }
  const Tensor& big = (av.numel() >= bv.numel()) ? av : bv;
  const int64_t n = big.numel();
  const int64_t sa = a_scalar && n > 1 ? 0 : 1;
  const int64_t sb = b_scalar && n > 1 ? 0 : 1;
  const double* ap = av.data();
  const double* bp = bv.data();

  std::vector<double> out(static_cast<size_t>(n));
  switch (op) {
    case BinOp::Add:
      for (int64_t i = 0; i < n; ++i) out[i] = ap[i * sa] + bp[i * sb];
      break;
    case BinOp::Sub:
      for (int64_t i = 0; i < n; ++i) out[i] = ap[i * sa] - bp[i * sb];
      break;
    case BinOp::Mul:
      for (int64_t i = 0; i < n; ++i) out[i] = ap[i * sa] * bp[i * sb];
      break;
    case BinOp::Div:
      for (int64_t i = 0; i < n; ++i) {
        if (bp[i * sb] == 0.0) throw NumericError("division by zero");
        out[i] = ap[i * sa] / bp[i * sb];
      }
      break;
    case BinOp::SafeDiv:
      for (int64_t i = 0; i < n; ++i) out[i] = ap[i * sa] / std::max(bp[i * sb], floor);
      break;
  }

  return t.record(
      Tensor(big.shape(), std::move(out)), {a.id, b.id},
      [op, sa, sb, n, floor](BackwardCtx& ctx) {
        const double* g = ctx.gout();
        const double* ap = ctx.in_val(0).data();
        const double* bp = ctx.in_val(1).data();
        double* ga = ctx.gin(0);
        double* gb = ctx.gin(1);
        switch (op) {
          case BinOp::Add:
            for (int64_t i = 0; i < n; ++i) {
              if (ga) ga[i * sa] += g[i];
              if (gb) gb[i * sb] += g[i];
            }
            break;
          case BinOp::Sub:
            for (int64_t i = 0; i < n; ++i) {
              if (ga) ga[i * sa] += g[i];
              if (gb) gb[i * sb] -= g[i];
            }
            break;
          case BinOp::Mul:
            for (int64_t i = 0; i < n; ++i) {
              if (ga) ga[i * sa] += g[i] * bp[i * sb];
              if (gb) gb[i * sb] += g[i] * ap[i * sa];
            }
            break;
          case BinOp::Div:
            for (int64_t i = 0; i < n; ++i) {
              const double d = bp[i * sb];
              if (ga) ga[i * sa] += g[i] / d;
              if (gb) gb[i * sb] -= g[i] * ap[i * sa] / (d * d);
            }
            break;
          case BinOp::SafeDiv:
            for (int64_t i = 0; i < n; ++i) {
              const double raw = bp[i * sb];
              const double d = std::max(raw, floor);
              if (ga) ga[i * sa] += g[i] / d;
              if (gb && raw >= floor) gb[i * sb] -= g[i] * ap[i * sa] / (d * d);
            }
            break;
        }
      });
}

}  // namespace

Var add(Var a, Var b) { return binary(a, b, BinOp::Add); }
Var sub(Var a, Var b) { return binary(a, b, BinOp::Sub); }
Var mul(Var a, Var b) { return binary(a, b, BinOp::Mul); }
Var div(Var a, Var b) { return binary(a, b, BinOp::Div); }

Var safe_div(Var a, Var b, double floor) {
  if (!(floor > 0.0)) throw ShapeError("safe_div floor must be positive");
  return binary(a, b, BinOp::SafeDiv, floor);
}

// ---------------------------------------------------------------------------
// Elementwise unary ops

namespace {

template <class Fwd, class Bwd>
Var unary(Var a, Fwd fwd, Bwd bwd) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const int64_t n = av.numel();
  const double* ap = av.data();
  std::vector<double> out(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out[i] = fwd(ap[i]);
  return t.record(Tensor(av.shape(), std::move(out)), {a.id}, [bwd, n](BackwardCtx& ctx) {
    double* ga = ctx.gin(0);
    if (!ga) return;
    const double* g = ctx.gout();
    const double* x = ctx.in_val(0).data();
    const double* y = ctx.out().data();
    for (int64_t i = 0; i < n; ++i) ga[i] += g[i] * bwd(x[i], y[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var add_scalar(Var a, double c) {
  return unary(
      a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Var mul_scalar(Var a, double c) {
  return unary(
      a, [c](double x) { return x * c; }, [c](double, double) { return c; });
}

Var neg(Var a) { return mul_scalar(a, -1.0); }

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      a, [](double x) { return stable_sigmoid(x); },
      [](double, double y) { return y * (1.0 - y); });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::fabs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var clamp(Var a, double lo, double hi) {
  if (!(lo <= hi)) throw ShapeError("clamp bounds out of order");
  return unary(
      a, [lo, hi](double x) { return std::min(std::max(x, lo), hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---------------------------------------------------------------------------
// matmul

Var matmul(Var a, Var b) {
  Tape& t = same_tape(a, b);
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require(av.ndim() == 2 && bv.ndim() == 2, "matmul expects rank-2 operands");
  const int64_t m = av.dim(0), k = av.dim(1), k2 = bv.dim(0), n = bv.dim(1);
  if (k != k2) {
    throw ShapeError("matmul inner dims " + shape_str(av.shape()) + " x " +
                     shape_str(bv.shape()));
  }
  std::vector<double> out(static_cast<size_t>(m * n), 0.0);
  const double* ap = av.data();
  const double* bp = bv.data();
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t l = 0; l < k; ++l) {
      const double x = ap[i * k + l];
      const double* brow = bp + l * n;
      double* orow = out.data() + i * n;
      for (int64_t j = 0; j < n; ++j) orow[j] += x * brow[j];
    }
  }
  return t.record(Tensor({m, n}, std::move(out)), {a.id, b.id}, [m, k, n](BackwardCtx& ctx) {
    const double* g = ctx.gout();
    const double* ap = ctx.in_val(0).data();
    const double* bp = ctx.in_val(1).data();
    if (double* ga = ctx.gin(0)) {
      for (int64_t i = 0; i < m; ++i)
        for (int64_t l = 0; l < k; ++l) {
          double s = 0.0;
          for (int64_t j = 0; j < n; ++j) s += g[i * n + j] * bp[l * n + j];
          ga[i * k + l] += s;
        }
    }
    if (double* gb = ctx.gin(1)) {
      for (int64_t i = 0; i < m; ++i)
        for (int64_t l = 0; l < k; ++l) {
          const double x = ap[i * k + l];
          for (int64_t j = 0; j < n; ++j) gb[l * n + j] += x * g[i * n + j];
        }
    }
  });
}

// ---------------------------------------------------------------------------
// conv2d

Var conv2d(Var input, Var kernel, int stride, int padding) {
  return conv2d(input, kernel, Var{}, stride, padding);
}

Var conv2d(Var input, Var kernel, Var bias, int stride, int padding) {
  Tape& t = same_tape(input, kernel);
  const Tensor& in = t.value(input);
  const Tensor& kt = t.value(kernel);
  require(in.ndim() == 4, "conv2d input must be NCHW");
  require(kt.ndim() == 4, "conv2d kernel must be OIHW");
  if (stride < 1) throw ShapeError("conv2d stride must be >= 1");
  if (padding < 0) throw ShapeError("conv2d padding must be >= 0");
  const int64_t N = in.dim(0), Ci = in.dim(1), H = in.dim(2), W = in.dim(3);
  const int64_t O = kt.dim(0), KI = kt.dim(1), kh = kt.dim(2), kw = kt.dim(3);
  if (KI != Ci) throw ShapeError("conv2d channel mismatch");
  if (kh > H + 2 * padding || kw > W + 2 * padding) {
    throw ShapeError("conv2d kernel larger than padded input");
  }
  const int64_t Ho = (H + 2 * padding - kh) / stride + 1;
  const int64_t Wo = (W + 2 * padding - kw) / stride + 1;

  const bool has_bias = bias.valid();
  const double* bp = nullptr;
  if (has_bias) {
    const Tensor& bt = t.value(bias);
    if (bt.ndim() != 1 || bt.dim(0) != O) throw ShapeError("conv2d bias must have shape [O]");
    bp = bt.data();
  }

  const double* ip = in.data();
  const double* kp = kt.data();
  std::vector<double> out(static_cast<size_t>(N * O * Ho * Wo), 0.0);
  const int s = stride, p = padding;

  for (int64_t n = 0; n < N; ++n) {
    for (int64_t o = 0; o < O; ++o) {
      double* oplane = out.data() + (n * O + o) * Ho * Wo;
      if (has_bias) {
        const double b = bp[o];
        for (int64_t i = 0; i < Ho * Wo; ++i) oplane[i] = b;
      }
      for (int64_t ci = 0; ci < Ci; ++ci) {
        const double* iplane = ip + (n * Ci + ci) * H * W;
        const double* kpl = kp + (o * Ci + ci) * kh * kw;
        for (int64_t ky = 0; ky < kh; ++ky) {
          for (int64_t kx = 0; kx < kw; ++kx) {
            const double w = kpl[ky * kw + kx];
            if (w == 0.0) continue;
            // x range keeping ix = x*s - p + kx inside [0, W).
            const int64_t xoff = kx - p;
            const int64_t x0 = xoff < 0 ? (-xoff + s - 1) / s : 0;
            const int64_t xnum = W - 1 - xoff;
            int64_t x1 = xnum < 0 ? -1 : xnum / s;
            if (x1 > Wo - 1) x1 = Wo - 1;
            for (int64_t y = 0; y < Ho; ++y) {
              const int64_t iy = y * s - p + ky;
              if (iy < 0 || iy >= H) continue;
              const double* irow = iplane + iy * W + xoff;
              double* orow = oplane + y * Wo;
              if (s == 1) {
                for (int64_t x = x0; x <= x1; ++x) orow[x] += w * irow[x];
              } else {
                for (int64_t x = x0; x <= x1; ++x) orow[x] += w * irow[x * s];
              }
            }
          }
        }
      }
    }
  }

  std::vector<int32_t> ids = {input.id, kernel.id};
  if (has_bias) ids.push_back(bias.id);

  auto bwd = [N, Ci, H, W, O, kh, kw, Ho, Wo, s, p, has_bias](BackwardCtx& ctx) {
    const double* g = ctx.gout();
    const double* ip = ctx.in_val(0).data();
    const double* kp = ctx.in_val(1).data();
    double* gi = ctx.gin(0);
    double* gk = ctx.gin(1);
    double* gb = has_bias ? ctx.gin(2) : nullptr;
    for (int64_t n = 0; n < N; ++n) {
      for (int64_t o = 0; o < O; ++o) {
        const double* gplane = g + (n * O + o) * Ho * Wo;
        if (gb) {
          double sum = 0.0;
          for (int64_t i = 0; i < Ho * Wo; ++i) sum += gplane[i];
          gb[o] += sum;
        }
        if (!gi && !gk) continue;
        for (int64_t ci = 0; ci < Ci; ++ci) {
          const double* iplane = ip + (n * Ci + ci) * H * W;
          double* giplane = gi ? gi + (n * Ci + ci) * H * W : nullptr;
          const double* kpl = kp + (o * Ci + ci) * kh * kw;
          double* gkpl = gk ? gk + (o * Ci + ci) * kh * kw : nullptr;
          for (int64_t ky = 0; ky < kh; ++ky) {
            for (int64_t kx = 0; kx < kw; ++kx) {
              const double w = kpl[ky * kw + kx];
              const int64_t xoff = kx - p;
              const int64_t x0 = xoff < 0 ? (-xoff + s - 1) / s : 0;
              const int64_t xnum = W - 1 - xoff;
              int64_t x1 = xnum < 0 ? -1 : xnum / s;
              if (x1 > Wo - 1) x1 = Wo - 1;
              double wacc = 0.0;
              for (int64_t y = 0; y < Ho; ++y) {
                const int64_t iy = y * s - p + ky;
                if (iy < 0 || iy >= H) continue;
                const double* grow = gplane + y * Wo;
                const double* irow = iplane + iy * W + xoff;
                double* girow = giplane ? giplane + iy * W + xoff : nullptr;
                for (int64_t x = x0; x <= x1; ++x) {
                  const double gv = grow[x];
                  const int64_t ix = x * s;
                  if (gkpl) wacc += gv * irow[ix];
                  if (girow) girow[ix] += gv * w;
                }
              }
              if (gkpl) gkpl[ky * kw + kx] += wacc;
            }
          }
        }
      }
    }
  };

  return t.record(Tensor({N, O, Ho, Wo}, std::move(out)), std::move(ids), std::move(bwd));
}

// ---------------------------------------------------------------------------
// Reductions

namespace {

std::vector<int64_t> check_axes(const Tensor& v, std::vector<int64_t> axes) {
  if (axes.empty()) throw ShapeError("reduction needs at least one axis");
  std::sort(axes.begin(), axes.end());
  for (size_t i = 0; i < axes.size(); ++i) {
    if (axes[i] < 0 || axes[i] >= v.ndim()) throw ShapeError("reduction axis out of range");
    if (i > 0 && axes[i] == axes[i - 1]) throw ShapeError("duplicate reduction axis");
  }
  return axes;
}

Var reduce(Var a, std::vector<int64_t> axes, bool mean) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  axes = check_axes(av, std::move(axes));

  Shape oshape;
  std::vector<int64_t> ostride_by_axis(static_cast<size_t>(av.ndim()), 0);
  {
    std::vector<bool> reduced(static_cast<size_t>(av.ndim()), false);
    for (int64_t ax : axes) reduced[static_cast<size_t>(ax)] = true;
    for (int64_t d = 0; d < av.ndim(); ++d)
      if (!reduced[static_cast<size_t>(d)]) oshape.push_back(av.shape()[static_cast<size_t>(d)]);
    int64_t stride = 1;
    for (int64_t d = av.ndim() - 1; d >= 0; --d) {
      if (!reduced[static_cast<size_t>(d)]) {
        ostride_by_axis[static_cast<size_t>(d)] = stride;
        stride *= av.shape()[static_cast<size_t>(d)];
      }
    }
  }

  const int64_t n_in = av.numel();
  const int64_t n_out = shape_numel(oshape);
  const double denom = mean ? static_cast<double>(n_in / n_out) : 1.0;

  // Flat input index -> flat output index, walked with an odometer.  Captures
  // by value so the backward closure can outlive this frame.
  auto for_each = [n_in, ostride_by_axis, ndim = av.ndim(), ishape = av.shape()](auto&& fn) {
    std::vector<int64_t> coord(static_cast<size_t>(ndim), 0);
    int64_t oidx = 0;
    for (int64_t i = 0; i < n_in; ++i) {
      fn(i, oidx);
      for (int64_t d = ndim - 1; d >= 0; --d) {
        auto du = static_cast<size_t>(d);
        coord[du]++;
        oidx += ostride_by_axis[du];
        if (coord[du] < ishape[du]) break;
        oidx -= ostride_by_axis[du] * ishape[du];
        coord[du] = 0;
      }
    }
  };

  std::vector<double> out(static_cast<size_t>(n_out), 0.0);
  const double* ap = av.data();
  for_each([&](int64_t i, int64_t oi) { out[oi] += ap[i]; });
  if (mean) {
    for (auto& v : out) v /= denom;
  }

  return t.record(Tensor(std::move(oshape), std::move(out)), {a.id},
                  [for_each, denom](BackwardCtx& ctx) {
                    double* ga = ctx.gin(0);
                    if (!ga) return;
                    const double* g = ctx.gout();
                    for_each([&](int64_t i, int64_t oi) { ga[i] += g[oi] / denom; });
                  });
}

}  // namespace

Var reduce_sum(Var a, std::vector<int64_t> axes) { return reduce(a, std::move(axes), false); }
Var reduce_mean(Var a, std::vector<int64_t> axes) { return reduce(a, std::move(axes), true); }

Var sum_all(Var a) {
  std::vector<int64_t> axes(static_cast<size_t>(a.tape->value(a).ndim()));
  for (size_t i = 0; i < axes.size(); ++i) axes[i] = static_cast<int64_t>(i);
  if (axes.empty()) return a;  // already scalar
  return reduce_sum(a, std::move(axes));
}

Var mean_all(Var a) {
  std::vector<int64_t> axes(static_cast<size_t>(a.tape->value(a).ndim()));
  for (size_t i = 0; i < axes.size(); ++i) axes[i] = static_cast<int64_t>(i);
  if (axes.empty()) return a;
  return reduce_mean(a, std::move(axes));
}

Var reduce_max(Var a, int64_t axis) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  if (axis < 0 || axis >= av.ndim()) throw ShapeError("reduce_max axis out of range");
  int64_t outer = 1, inner = 1;
  const int64_t mid = av.shape()[static_cast<size_t>(axis)];
  for (int64_t d = 0; d < axis; ++d) outer *= av.shape()[static_cast<size_t>(d)];
  for (int64_t d = axis + 1; d < av.ndim(); ++d) inner *= av.shape()[static_cast<size_t>(d)];

  Shape oshape = av.shape();
  oshape[static_cast<size_t>(axis)] = 1;
  std::vector<double> out(static_cast<size_t>(outer * inner));
  auto arg = std::make_shared<std::vector<int64_t>>(static_cast<size_t>(outer * inner));
  const double* ap = av.data();
  for (int64_t u = 0; u < outer; ++u) {
    for (int64_t v = 0; v < inner; ++v) {
      int64_t best = u * mid * inner + v;
      double bestv = ap[best];
      for (int64_t m = 1; m < mid; ++m) {
        const int64_t idx = (u * mid + m) * inner + v;
        if (ap[idx] > bestv) {
          bestv = ap[idx];
          best = idx;
        }
      }
      out[u * inner + v] = bestv;
      (*arg)[u * inner + v] = best;
    }
  }
  return t.record(Tensor(std::move(oshape), std::move(out)), {a.id}, [arg](BackwardCtx& ctx) {
    double* ga = ctx.gin(0);
    if (!ga) return;
    const double* g = ctx.gout();
    for (size_t j = 0; j < arg->size(); ++j) ga[(*arg)[j]] += g[j];
  });
}

// ---------------------------------------------------------------------------
// Structural ops

Var reshape(Var a, Shape shape) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  Tensor out = av.reshaped(std::move(shape));
  const int64_t n = av.numel();
  return t.record(std::move(out), {a.id}, [n](BackwardCtx& ctx) {
    double* ga = ctx.gin(0);
    if (!ga) return;
    const double* g = ctx.gout();
    for (int64_t i = 0; i < n; ++i) ga[i] += g[i];
  });
}

Var concat(const std::vector<Var>& xs, int64_t axis) {
  if (xs.empty()) throw ShapeError("concat of zero tensors");
  Tape& t = *xs[0].tape;
  std::vector<const Tensor*> vals;
  for (Var v : xs) {
    same_tape(xs[0], v);
    vals.push_back(&t.value(v));
  }
  const Tensor& first = *vals[0];
  if (axis < 0 || axis >= first.ndim()) throw ShapeError("concat axis out of range");
  int64_t outer = 1, inner = 1;
  for (int64_t d = 0; d < axis; ++d) outer *= first.shape()[static_cast<size_t>(d)];
  for (int64_t d = axis + 1; d < first.ndim(); ++d) inner *= first.shape()[static_cast<size_t>(d)];

  int64_t total_axis = 0;
  std::vector<int64_t> axis_len;
  for (const Tensor* v : vals) {
    if (v->ndim() != first.ndim()) throw ShapeError("concat rank mismatch");
    for (int64_t d = 0; d < first.ndim(); ++d) {
      if (d != axis && v->shape()[static_cast<size_t>(d)] != first.shape()[static_cast<size_t>(d)])
        throw ShapeError("concat non-axis dims must match");
    }
    axis_len.push_back(v->shape()[static_cast<size_t>(axis)]);
    total_axis += axis_len.back();
  }

  Shape oshape = first.shape();
  oshape[static_cast<size_t>(axis)] = total_axis;
  std::vector<double> out(static_cast<size_t>(outer * total_axis * inner));
  int64_t offset = 0;
  for (size_t k = 0; k < vals.size(); ++k) {
    const double* src = vals[k]->data();
    const int64_t block = axis_len[k] * inner;
    for (int64_t u = 0; u < outer; ++u) {
      std::memcpy(out.data() + (u * total_axis + offset) * inner, src + u * block,
                  static_cast<size_t>(block) * sizeof(double));
    }
    offset += axis_len[k];
  }

  std::vector<int32_t> ids;
  for (Var v : xs) ids.push_back(v.id);
  return t.record(Tensor(std::move(oshape), std::move(out)), std::move(ids),
                  [outer, inner, total_axis, axis_len](BackwardCtx& ctx) {
                    const double* g = ctx.gout();
                    int64_t offset = 0;
                    for (size_t k = 0; k < axis_len.size(); ++k) {
                      const int64_t block = axis_len[k] * inner;
                      if (double* ga = ctx.gin(k)) {
                        for (int64_t u = 0; u < outer; ++u) {
                          const double* grow = g + (u * total_axis + offset) * inner;
                          double* garow = ga + u * block;
                          for (int64_t i = 0; i < block; ++i) garow[i] += grow[i];
                        }
                      }
                      offset += axis_len[k];
                    }
                  });
}

Var slice(Var a, std::vector<int64_t> starts, Shape sizes) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  const auto nd = static_cast<size_t>(av.ndim());
  if (starts.size() != nd || sizes.size() != nd) throw ShapeError("slice rank mismatch");
  for (size_t d = 0; d < nd; ++d) {
    if (starts[d] < 0 || sizes[d] <= 0 || starts[d] + sizes[d] > av.shape()[d]) {
      throw ShapeError("slice out of bounds");
    }
  }
  std::vector<int64_t> istride(nd, 1);
  for (size_t d = nd; d-- > 1;) istride[d - 1] = istride[d] * av.shape()[d];

  const int64_t n_out = shape_numel(sizes);
  // Flat output index -> flat input index via an odometer over the window.
  auto map_indices = [starts, sizes, istride, nd, n_out](auto&& fn) {
    std::vector<int64_t> coord(nd, 0);
    int64_t iidx = 0;
    for (size_t d = 0; d < nd; ++d) iidx += starts[d] * istride[d];
    for (int64_t j = 0; j < n_out; ++j) {
      fn(j, iidx);
      for (size_t d = nd; d-- > 0;) {
        coord[d]++;
        iidx += istride[d];
        if (coord[d] < sizes[d]) break;
        iidx -= istride[d] * sizes[d];
        coord[d] = 0;
      }
    }
  };

  std::vector<double> out(static_cast<size_t>(n_out));
  const double* ap = av.data();
  map_indices([&](int64_t j, int64_t i) { out[j] = ap[i]; });
  return t.record(Tensor(std::move(sizes), std::move(out)), {a.id},
                  [map_indices](BackwardCtx& ctx) {
                    double* ga = ctx.gin(0);
                    if (!ga) return;
                    const double* g = ctx.gout();
                    map_indices([&](int64_t j, int64_t i) { ga[i] += g[j]; });
                  });
}

Var avg_pool2(Var a) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  require(av.ndim() == 4, "avg_pool2 expects NCHW");
  const int64_t N = av.dim(0), C = av.dim(1), H = av.dim(2), W = av.dim(3);
  if (H % 2 != 0 || W % 2 != 0) throw ShapeError("avg_pool2 needs even spatial dims");
  const int64_t Ho = H / 2, Wo = W / 2;
  std::vector<double> out(static_cast<size_t>(N * C * Ho * Wo));
  const double* ap = av.data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* pl = ap + nc * H * W;
    double* op = out.data() + nc * Ho * Wo;
    for (int64_t y = 0; y < Ho; ++y)
      for (int64_t x = 0; x < Wo; ++x) {
        const double* r0 = pl + (2 * y) * W + 2 * x;
        const double* r1 = r0 + W;
        op[y * Wo + x] = 0.25 * (r0[0] + r0[1] + r1[0] + r1[1]);
      }
  }
  return t.record(Tensor({N, C, Ho, Wo}, std::move(out)), {a.id},
                  [N, C, H, W, Ho, Wo](BackwardCtx& ctx) {
                    double* ga = ctx.gin(0);
                    if (!ga) return;
                    const double* g = ctx.gout();
                    for (int64_t nc = 0; nc < N * C; ++nc) {
                      const double* gp = g + nc * Ho * Wo;
                      double* gl = ga + nc * H * W;
                      for (int64_t y = 0; y < Ho; ++y)
                        for (int64_t x = 0; x < Wo; ++x) {
                          const double gv = 0.25 * gp[y * Wo + x];
                          double* r0 = gl + (2 * y) * W + 2 * x;
                          double* r1 = r0 + W;
                          r0[0] += gv;
                          r0[1] += gv;
                          r1[0] += gv;
                          r1[1] += gv;
                        }
                    }
                  });
}

Var upsample2(Var a) {
  Tape& t = *a.tape;
  const Tensor& av = t.value(a);
  require(av.ndim() == 4, "upsample2 expects NCHW");
  const int64_t N = av.dim(0), C = av.dim(1), H = av.dim(2), W = av.dim(3);
  const int64_t Ho = H * 2, Wo = W * 2;
  std::vector<double> out(static_cast<size_t>(N * C * Ho * Wo));
  const double* ap = av.data();
  for (int64_t nc = 0; nc < N * C; ++nc) {
    const double* pl = ap + nc * H * W;
    double* op = out.data() + nc * Ho * Wo;
    for (int64_t y = 0; y < H; ++y)
      for (int64_t x = 0; x < W; ++x) {
        const double v = pl[y * W + x];
        double* r0 = op + (2 * y) * Wo + 2 * x;
        double* r1 = r0 + Wo;
        r0[0] = v;
        r0[1] = v;
        r1[0] = v;
        r1[1] = v;
      }
  }
  return t.record(Tensor({N, C, Ho, Wo}, std::move(out)), {a.id},
                  [N, C, H, W, Wo](BackwardCtx& ctx) {
                    double* ga = ctx.gin(0);
                    if (!ga) return;
                    const double* g = ctx.gout();
                    const int64_t Ho = H * 2;
                    for (int64_t nc = 0; nc < N * C; ++nc) {
                      const double* gp = g + nc * Ho * Wo;
                      double* gl = ga + nc * H * W;
                      for (int64_t y = 0; y < H; ++y)
                        for (int64_t x = 0; x < W; ++x) {
                          const double* r0 = gp + (2 * y) * Wo + 2 * x;
                          const double* r1 = r0 + Wo;
                          gl[y * W + x] += r0[0] + r0[1] + r1[0] + r1[1];
                        }
                    }
                  });
}

}  // namespace bgl
