#pragma once

#include "transms/common.hpp"

namespace transms {

/// Reported in place of +inf when the images agree exactly.
inline constexpr double kPsnrCap = 300.0;

/// ||estimate - reference||_F / ||reference||_F (a fraction, not percent).
template <typename Derived, typename Other>
double nrmse(const Eigen::MatrixBase<Derived>& estimate, const Eigen::MatrixBase<Other>& reference) {
  if (estimate.rows() != reference.rows() || estimate.cols() != reference.cols())
    throw ShapeError("nrmse: shapes differ");
  const double ref = reference.norm();
  if (ref == 0.0) throw Error("nrmse: zero reference");
  return (estimate - reference).norm() / ref;
}

/// 20 log10(sqrt(N) ||x_ref||_inf / ||x - x_ref||_2), capped at kPsnrCap.
double psnr(const VectorXd& x, const VectorXd& reference);

}  // namespace transms
