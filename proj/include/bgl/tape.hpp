// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <unordered_map>
#include <vector>

#include "bgl/tensor.hpp"

namespace bgl {

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; only valid for the
// lifetime of the tape that produced it and until that tape's backward runs.
struct Var {
  Tape* tape = nullptr;
  int32_t id = -1;
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Passed to backward closures. Exposes the node's forward value, the incoming
// output gradient, and per-input accumulation buffers.
class BackwardCtx {
 public:
  BackwardCtx(Tape& tape, int32_t node) : tape_(tape), node_(node) {}
  const Tensor& out() const;
  const double* gout() const;
  const Tensor& in_val(size_t k) const;
  // Gradient buffer of input k (zero-initialised on first access), or nullptr
  // when that input does not require gradients.
  double* gin(size_t k);

 private:
  Tape& tape_;
  int32_t node_;
};

// Dynamic record of primitive operations. Single-threaded; build a fresh tape
// per loss evaluation, run backward once, and the node storage is released.
// Recorded operations always refer to earlier nodes, so one reverse sweep
// visits each node exactly once.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = false);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Reference stays valid while further ops are recorded; backward() frees it.
  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const;
  size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Reverse sweep from a one-element output. Returns gradients for every
  // grad-requiring leaf keyed by node id (zeros if the leaf never fed the
  // output). Frees all node storage; the tape cannot be used afterwards.
  std::unordered_map<int32_t, Tensor> backward(Var output);

  // Internal recording hook used by the op functions below.
  using BackwardFn = std::function<void(BackwardCtx&)>;
  Var record(Tensor value, std::vector<int32_t> inputs, BackwardFn fn);

 private:
  friend class BackwardCtx;
  struct Node {
    Tensor value;
    std::vector<int32_t> inputs;
    BackwardFn backward;  // empty for leaves and grad-free subgraphs
    bool needs_grad = false;
    bool is_leaf = false;
    bool requires_grad = false;
  };
  void check_var(Var v) const;

  // Deque so value() references survive later record() calls.
  std::deque<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  bool consumed_ = false;
};

// Elementwise binary ops accept equal shapes or a one-element operand broadcast
// against the other side; anything else is a ShapeError.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
// Raw division; any exactly-zero denominator element is a NumericError.
Var div(Var a, Var b);
// Division with the denominator clamped to at least `floor`; the clamped
// entries get zero denominator-gradient.
Var safe_div(Var a, Var b, double floor = 1e-4);

Var add_scalar(Var a, double c);
Var mul_scalar(Var a, double c);
Var neg(Var a);
Var relu(Var a);
Var sigmoid(Var a);
Var abs(Var a);
Var clamp(Var a, double lo, double hi);

Var matmul(Var a, Var b);

// Cross-correlation on NCHW input with an OIHW kernel, zero padding and the
// usual floor((H + 2p - kh)/stride) + 1 output size.
Var conv2d(Var input, Var kernel, int stride = 1, int padding = 0);
Var conv2d(Var input, Var kernel, Var bias, int stride = 1, int padding = 0);

// Reductions remove the listed axes (an empty axis list is a ShapeError).
Var reduce_sum(Var a, std::vector<int64_t> axes);
Var reduce_mean(Var a, std::vector<int64_t> axes);
Var sum_all(Var a);
Var mean_all(Var a);
// Max along one axis, kept with size 1; gradient flows to the first argmax.
Var reduce_max(Var a, int64_t axis);

Var reshape(Var a, Shape shape);
Var concat(const std::vector<Var>& xs, int64_t axis);
Var slice(Var a, std::vector<int64_t> starts, Shape sizes);

// 2x2 mean pooling with stride 2 on NCHW (even H and W required).
Var avg_pool2(Var a);
// Nearest-neighbour 2x upsampling on NCHW.
Var upsample2(Var a);

}  // namespace bgl
