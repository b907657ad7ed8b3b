// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/parameter_vector.hpp"

#include <cmath>
#include <cstring>

namespace bgl {

void ParameterVector::add(std::string name, Tensor t) {
  if (name.empty()) throw ShapeError("segment name must be non-empty");
  if (has(name)) throw ShapeError("duplicate segment name: " + name);
  segs_.emplace_back(std::move(name), std::move(t));
}

int64_t ParameterVector::total_len() const {
  int64_t n = 0;
  for (const auto& [name, t] : segs_) n += t.numel();
  return n;
}

size_t ParameterVector::index_of(std::string_view name) const {
  for (size_t i = 0; i < segs_.size(); ++i) {
    if (segs_[i].first == name) return i;
  }
  throw ShapeError("no segment named '" + std::string(name) + "'");
}

const Tensor& ParameterVector::tensor(std::string_view name) const {
  return segs_[index_of(name)].second;
}

bool ParameterVector::has(std::string_view name) const {
  for (const auto& [n, t] : segs_) {
    if (n == name) return true;
  }
  return false;
}

void ParameterVector::set(size_t i, Tensor t) {
  if (!segs_[i].second.same_shape(t)) {
    throw ShapeError("segment '" + segs_[i].first + "' shape change");
  }
  segs_[i].second = std::move(t);
}

void ParameterVector::set(std::string_view name, Tensor t) { set(index_of(name), std::move(t)); }

std::vector<double> ParameterVector::flatten() const {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(total_len()));
  for (const auto& [name, t] : segs_) {
    flat.insert(flat.end(), t.values().begin(), t.values().end());
  }
  return flat;
}

ParameterVector ParameterVector::unflatten(const std::vector<double>& flat) const {
  if (static_cast<int64_t>(flat.size()) != total_len()) {
    throw ShapeError("unflatten length " + std::to_string(flat.size()) + " != " +
                     std::to_string(total_len()));
  }
  ParameterVector out;
  size_t off = 0;
  for (const auto& [name, t] : segs_) {
    const auto n = static_cast<size_t>(t.numel());
    out.add(name, Tensor(t.shape(), std::vector<double>(flat.begin() + off,
                                                        flat.begin() + off + n)));
    off += n;
  }
  return out;
}

ParameterVector ParameterVector::zeros_like() const {
  ParameterVector out;
  for (const auto& [name, t] : segs_) out.add(name, Tensor::zeros(t.shape()));
  return out;
}

bool same_structure(const ParameterVector& a, const ParameterVector& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a.name(i) != b.name(i) || !a.tensor(i).same_shape(b.tensor(i))) return false;
  }
  return true;
}

bool bitwise_equal(const ParameterVector& a, const ParameterVector& b) {
  if (!same_structure(a, b)) return false;
  for (size_t i = 0; i < a.size(); ++i) {
    const auto& x = a.tensor(i).values();
    const auto& y = b.tensor(i).values();
    if (std::memcmp(x.data(), y.data(), x.size() * sizeof(double)) != 0) return false;
  }
  return true;
}

double dot(const ParameterVector& a, const ParameterVector& b) {
  if (!same_structure(a, b)) throw ShapeError("dot on mismatched parameter vectors");
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double* x = a.tensor(i).data();
    const double* y = b.tensor(i).data();
    const int64_t n = a.tensor(i).numel();
    for (int64_t j = 0; j < n; ++j) s += x[j] * y[j];
  }
  return s;
}

double norm(const ParameterVector& a) { return std::sqrt(dot(a, a)); }

ParameterVector add_scaled(const ParameterVector& p, double alpha, const ParameterVector& q) {
  if (!same_structure(p, q)) throw ShapeError("add_scaled on mismatched parameter vectors");
  ParameterVector out;
  for (size_t i = 0; i < p.size(); ++i) {
    const double* x = p.tensor(i).data();
    const double* y = q.tensor(i).data();
    const int64_t n = p.tensor(i).numel();
    std::vector<double> v(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) v[j] = x[j] + alpha * y[j];
    out.add(p.name(i), Tensor(p.tensor(i).shape(), std::move(v)));
  }
  return out;
}

ParameterVector scale(const ParameterVector& p, double alpha) {
  ParameterVector out;
  for (size_t i = 0; i < p.size(); ++i) {
    const double* x = p.tensor(i).data();
    const int64_t n = p.tensor(i).numel();
    std::vector<double> v(static_cast<size_t>(n));
    for (int64_t j = 0; j < n; ++j) v[j] = alpha * x[j];
    out.add(p.name(i), Tensor(p.tensor(i).shape(), std::move(v)));
  }
  return out;
}

bool all_finite(const ParameterVector& p) {
  for (size_t i = 0; i < p.size(); ++i) {
    if (!p.tensor(i).all_finite()) return false;
  }
  return true;
}

Var ParamVars::at(std::string_view name) const {
  for (size_t i = 0; i < vars.size(); ++i) {
    if (source->name(i) == name) return vars[i];
  }
  throw ShapeError("no registered segment named '" + std::string(name) + "'");
}

ParamVars register_params(Tape& tape, const ParameterVector& pv, bool requires_grad) {
  ParamVars out;
  out.source = &pv;
  out.vars.reserve(pv.size());
  for (size_t i = 0; i < pv.size(); ++i) {
    out.vars.push_back(tape.leaf(pv.tensor(i), requires_grad));
  }
  return out;
}

ParameterVector collect_grads(const ParamVars& pv,
                              const std::unordered_map<int32_t, Tensor>& grads) {
  ParameterVector out;
  for (size_t i = 0; i < pv.vars.size(); ++i) {
    auto it = grads.find(pv.vars[i].id);
    if (it != grads.end()) {
      out.add(pv.source->name(i), it->second);
    } else {
      out.add(pv.source->name(i), Tensor::zeros(pv.source->tensor(i).shape()));
    }
  }
  return out;
}

}  // namespace bgl
