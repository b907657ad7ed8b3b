// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#include "bgl/tensor.hpp"

#include <cmath>
#include <sstream>

namespace bgl {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  const int64_t expect = shape_numel(shape_);
  if (expect != static_cast<int64_t>(values.size())) {
    throw ShapeError("shape " + shape_str(shape_) + " wants " + std::to_string(expect) +
                     " values, got " + std::to_string(values.size()));
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return full(std::move(shape), 0.0); }

Tensor Tensor::full(Shape shape, double v) {
  const int64_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(static_cast<size_t>(n), v));
}

int64_t Tensor::dim(int64_t axis) const {
  if (axis < 0 || axis >= ndim()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(shape_));
  }
  return shape_[static_cast<size_t>(axis)];
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() on tensor of shape " + shape_str(shape_));
  return (*data_)[0];
}

Tensor Tensor::reshaped(Shape new_shape) const {
  if (shape_numel(new_shape) != numel()) {
    throw ShapeError("reshape " + shape_str(shape_) + " -> " + shape_str(new_shape) +
                     " changes element count");
  }
  return Tensor(std::move(new_shape), data_);
}

bool Tensor::all_finite() const {
  for (double v : *data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace bgl
