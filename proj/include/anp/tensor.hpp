// Copyright 2026 The ANP Authors
// SPDX-License-Identifier: Apache-2.0
//
// Dense 64-bit tensors. Storage is row-major; rank-0 and rank-1 tensors are
// viewed as 1x1 and 1xd matrices when a matrix view is needed.

#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace anp {

using Shape = std::vector<std::size_t>;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Raised for operand shapes that do not conform.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_str(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

class Tensor {
 public:
  Tensor() : shape_{}, values_(1, 0.0) {}
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor scalar(double v) { return Tensor(Shape{}, std::vector<double>{v}); }
  static Tensor vector(std::vector<double> values);
  /// Row-major literal, e.g. Tensor::matrix(2, 2, {1, 0, 0, 1}).
  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<double> values);
  static Tensor from_matrix(const RowMatrix& m);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  std::size_t dim(std::size_t axis) const;

  // Matrix view extents: rank 0 -> 1x1, rank 1 [d] -> 1xd, rank 2 [r, c] -> rxc.
  std::size_t rows() const;
  std::size_t cols() const;

  double* data() { return values_.data(); }
  const double* data() const { return values_.data(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& storage() { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

  double item() const;

  MatrixMap matrix() { return MatrixMap(values_.data(), rows(), cols()); }
  ConstMatrixMap matrix() const { return ConstMatrixMap(values_.data(), rows(), cols()); }

  /// Same values under a new shape with equal element count.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const;

  /// Bit-exact equality of shape and values.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  Shape shape_;
  std::vector<double> values_;
};

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace anp
