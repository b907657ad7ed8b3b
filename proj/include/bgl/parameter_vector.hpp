// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bgl/tape.hpp"
#include "bgl/tensor.hpp"

namespace bgl {

// Ordered collection of uniquely named tensor segments. This is how parameter
// blocks (generator weights, task-network weights) travel between solvers,
// estimators and checkpoints. flatten/unflatten round-trip exactly.
class ParameterVector {
 public:
  ParameterVector() = default;

  void add(std::string name, Tensor t);

  size_t size() const { return segs_.size(); }
  bool empty() const { return segs_.empty(); }
  int64_t total_len() const;

  const std::string& name(size_t i) const { return segs_[i].first; }
  const Tensor& tensor(size_t i) const { return segs_[i].second; }
  const Tensor& tensor(std::string_view name) const;
  bool has(std::string_view name) const;

  // Replaces a segment's payload; the new tensor must keep the shape.
  void set(size_t i, Tensor t);
  void set(std::string_view name, Tensor t);

  std::vector<double> flatten() const;
  // New vector with this structure and the given flat payload.
  ParameterVector unflatten(const std::vector<double>& flat) const;
  ParameterVector zeros_like() const;

 private:
  size_t index_of(std::string_view name) const;
  std::vector<std::pair<std::string, Tensor>> segs_;
};

bool same_structure(const ParameterVector& a, const ParameterVector& b);
bool bitwise_equal(const ParameterVector& a, const ParameterVector& b);

double dot(const ParameterVector& a, const ParameterVector& b);
double norm(const ParameterVector& a);
// p + alpha * q, segment by segment.
ParameterVector add_scaled(const ParameterVector& p, double alpha, const ParameterVector& q);
ParameterVector scale(const ParameterVector& p, double alpha);
bool all_finite(const ParameterVector& p);

// Leaf handles for every segment of a parameter vector on one tape.
struct ParamVars {
  std::vector<Var> vars;
  const ParameterVector* source = nullptr;

  Var operator[](size_t i) const { return vars[i]; }
  Var at(std::string_view name) const;
};

// The ParamVars keeps a pointer to `pv` for name lookups, so `pv` must
// outlive it; registering a temporary is rejected outright.
ParamVars register_params(Tape& tape, const ParameterVector& pv, bool requires_grad);
ParamVars register_params(Tape& tape, ParameterVector&& pv, bool requires_grad) = delete;

// Assembles a gradient vector matching `pv`'s structure from a backward()
// result; segments the output never depended on come back as zeros.
ParameterVector collect_grads(const ParamVars& pv,
                              const std::unordered_map<int32_t, Tensor>& grads);

}  // namespace bgl
