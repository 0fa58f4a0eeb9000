// Copyright (c) 2026 vqamix authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vqamix/common.hpp"

namespace vqamix {

// Dense row-major tensor of doubles. All computation in the engine runs in
// this one width; gradient checks rely on it being double.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> shape);

  static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int> shape, double v);
  static Tensor from(std::vector<int> shape, std::vector<double> data);
  static Tensor scalar(double v) { return from({1}, {v}); }

  const std::vector<int>& shape() const { return shape_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  int size() const { return static_cast<int>(data_.size()); }
  bool empty() const { return data_.empty() && shape_.empty(); }
  bool is_scalar() const { return data_.size() == 1; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](int i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int i) const { return data_[static_cast<size_t>(i)]; }

  // 2-d accessors; valid only for ndim()==2.
  int rows() const { return shape_[0]; }
  int cols() const { return shape_[1]; }
  double& at(int r, int c) { return data_[static_cast<size_t>(r) * cols() + c]; }
  double at(int r, int c) const { return data_[static_cast<size_t>(r) * cols() + c]; }

  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }
  void fill(double v);
  void zero() { fill(0.0); }
  bool all_finite() const;
  double item() const;  // requires is_scalar()

  std::string shape_str() const;

 private:
  std::vector<int> shape_;
  std::vector<double> data_;
};

// Named leaf tensor with a persistent gradient buffer of identical shape.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  bool grad_live = false;  // set by Graph::backward, cleared by zero_grad

  Parameter() = default;
  Parameter(std::string n, Tensor v)
      : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros(value.shape())) {}

  void zero_grad() {
    grad.zero();
    grad_live = false;
  }
};

}  // namespace vqamix
