// Copyright (c) 2026, the bgl authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "bgl/errors.hpp"

namespace bgl {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array of doubles. Immutable once constructed: copies are
// cheap (shared payload) and instances may be handed between threads freely.
// An empty shape {} denotes a scalar holding exactly one value.
class Tensor {
 public:
  Tensor() : Tensor(Shape{}, std::vector<double>{0.0}) {}
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, {v}); }
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double v);

  const Shape& shape() const { return shape_; }
  int64_t ndim() const { return static_cast<int64_t>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_->size()); }
  int64_t dim(int64_t axis) const;

  const std::vector<double>& values() const { return *data_; }
  const double* data() const { return data_->data(); }
  double operator[](int64_t flat) const { return (*data_)[flat]; }

  bool is_scalar() const { return shape_.empty(); }
  // Value of a one-element tensor; throws ShapeError otherwise.
  double item() const;

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  // Same payload under a new shape with identical element count.
  Tensor reshaped(Shape new_shape) const;

 private:
  Tensor(Shape shape, std::shared_ptr<const std::vector<double>> data)
      : shape_(std::move(shape)), data_(std::move(data)) {}
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

}  // namespace bgl
