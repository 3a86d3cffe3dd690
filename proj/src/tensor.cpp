#include "transms/tensor.hpp"

#include <sstream>

namespace transms {

Index shape_size(const Shape& shape) {
  Index n = 1;
  for (Index e : shape) {
    if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_string(shape));
    n *= e;
  }
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(VectorXd::Zero(shape_size(shape_))) {}

Tensor::Tensor(Shape shape, VectorXd data) : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_size(shape_) != data_.size())
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_string(shape_));
}

Tensor Tensor::constant(Shape shape, double value) {
  Tensor t(std::move(shape));
  t.data_.setConstant(value);
  return t;
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values) {
  VectorXd data(static_cast<Index>(values.size()));
  Index i = 0;
  for (double v : values) data[i++] = v;
  return Tensor(std::move(shape), std::move(data));
}

Index Tensor::offset(std::initializer_list<Index> idx) const {
  if (idx.size() != shape_.size()) throw ShapeError("index rank mismatch for " + shape_string(shape_));
  Index off = 0;
  std::size_t axis = 0;
  for (Index i : idx) {
    if (i < 0 || i >= shape_[axis]) throw ShapeError("index out of range for " + shape_string(shape_));
    off = off * shape_[axis] + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<Index> idx) { return data_[offset(idx)]; }
double Tensor::at(std::initializer_list<Index> idx) const { return data_[offset(idx)]; }

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != size())
    throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  return Tensor(std::move(shape), data_);
}

void Tensor::ensure_finite(const std::string& where) const {
  if (!all_finite()) throw NumericError("non-finite value produced by " + where);
}

Eigen::Map<RowMajorMatrix<double>> Tensor::as_matrix(Index rows, Index cols) {
  if (rows * cols != size()) throw ShapeError("matrix view does not cover tensor " + shape_string(shape_));
  return {data_.data(), rows, cols};
}

Eigen::Map<const RowMajorMatrix<double>> Tensor::as_matrix(Index rows, Index cols) const {
  if (rows * cols != size()) throw ShapeError("matrix view does not cover tensor " + shape_string(shape_));
  return {data_.data(), rows, cols};
}

void require_shape(const Tensor& t, const Shape& expected, const char* what) {
  if (t.shape() != expected)
    throw ShapeError(std::string(what) + ": expected " + shape_string(expected) + ", got " +
                     shape_string(t.shape()));
}

}  // namespace transms
