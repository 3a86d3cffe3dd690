#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include "transms/common.hpp"

namespace transms {

using Shape = std::vector<Index>;

Index shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense real tensor, row-major, 64-bit.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape);
  Tensor(Shape shape, VectorXd data);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor constant(Shape shape, double value);
  static Tensor from(Shape shape, std::initializer_list<double> values);

  const Shape& shape() const { return shape_; }
  Index dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  Index size() const { return data_.size(); }

  VectorXd& data() { return data_; }
  const VectorXd& data() const { return data_; }
  double* ptr() { return data_.data(); }
  const double* ptr() const { return data_.data(); }

  double& operator[](Index i) { return data_[i]; }
  double operator[](Index i) const { return data_[i]; }

  double& at(std::initializer_list<Index> idx);
  double at(std::initializer_list<Index> idx) const;

  /// Same data, new extents. Throws when the element count differs.
  Tensor reshaped(Shape shape) const;

  bool all_finite() const { return data_.allFinite(); }
  /// Throws NumericError naming `where` if any element is NaN or Inf.
  void ensure_finite(const std::string& where) const;

  Eigen::Map<RowMajorMatrix<double>> as_matrix(Index rows, Index cols);
  Eigen::Map<const RowMajorMatrix<double>> as_matrix(Index rows, Index cols) const;

 private:
  Index offset(std::initializer_list<Index> idx) const;

  Shape shape_;
  VectorXd data_;
};

void require_shape(const Tensor& t, const Shape& expected, const char* what);

}  // namespace transms
