#pragma once

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace transms {

using Index = Eigen::Index;
using Complex = std::complex<double>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using VectorXd = Vector<double>;
using VectorXcd = Vector<Complex>;
using MatrixXd = Matrix<double>;
using MatrixXcd = Matrix<Complex>;

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual const char* kind() const noexcept { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "shape"; }
};

/// NaN or Inf produced by a computation.
class NumericError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "numeric"; }
};

class GeometryError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "geometry"; }
};

class FormatError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "format"; }
};

/// Missing or unreadable files.
class IoError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "io"; }
};

class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, std::string key = {})
      : Error(what), key_(std::move(key)) {}
  const char* kind() const noexcept override { return "config"; }
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Pixel-grid extents. Maps are stored row-major with index = y * width + x.
struct Grid {
  Index width = 0;
  Index height = 0;

  Index size() const { return width * height; }
  bool operator==(const Grid&) const = default;
};

}  // namespace transms
