#pragma once

#include <cmath>

#include "transms/autodiff.hpp"
#include "transms/sampling.hpp"

namespace transms {

/// How complex rows meet the noise ball: one ball over the whole complex
/// vector, or separate balls (radius / sqrt(2)) for real and imaginary parts.
enum class DcMode { kJoint, kSplit };

/// Euclidean projection of v onto {u : ||u - center|| <= radius}.
template <typename Scalar>
Vector<Scalar> project_to_ball(const Vector<Scalar>& v, const Vector<Scalar>& center, double radius) {
  const Vector<Scalar> offset = v - center;
  const double norm = offset.norm();
  if (norm <= radius) return v;
  return center + (radius / norm) * offset;
}

template <typename Scalar>
struct DcProblem {
  Vector<Scalar> lr_row;     // b, length m = W * H
  BoxcarOperator boxcar;     // D
  double sigma = 0.0;        // noise std of b
  Vector<Scalar> candidate;  // network estimate before projection
};

/// Closest point to the candidate with ||D a - b|| <= sqrt(m) sigma:
/// a + (1 - sqrt(m) sigma / ||r||) D^T r with r = b - D a, or a unchanged
/// when already consistent.
template <typename Scalar>
Vector<Scalar> dc_project(const DcProblem<Scalar>& p) {
  if (p.sigma < 0.0) throw Error("dc_project: sigma must be non-negative");
  const Index m = p.boxcar.lr().size();
  if (p.lr_row.size() != m || p.candidate.size() != p.boxcar.hr().size())
    throw ShapeError("dc_project: row lengths do not match the box-car grids");
  const Vector<Scalar> residual = p.lr_row - p.boxcar.template apply<Scalar>(p.candidate);
  const double norm = residual.norm();
  const double bound = std::sqrt(double(m)) * p.sigma;
  if (norm <= bound) return p.candidate;
  return p.candidate + (1.0 - bound / norm) * p.boxcar.template adjoint<Scalar>(residual);
}

VectorXcd dc_project(const DcProblem<Complex>& p, DcMode mode);

/// Same projection for an explicit operator; throws unless D D^T = I.
template <typename Scalar>
Vector<Scalar> dc_project_dense(const MatrixXd& d, const Vector<Scalar>& lr_row, double sigma,
                                const Vector<Scalar>& candidate) {
  if ((d * d.transpose() - MatrixXd::Identity(d.rows(), d.rows())).cwiseAbs().maxCoeff() > 1e-10)
    throw Error("dc_project: operator rows are not orthonormal");
  const Vector<Scalar> residual = lr_row - d.template cast<Scalar>() * candidate;
  const double norm = residual.norm();
  const double bound = std::sqrt(double(d.rows())) * sigma;
  if (norm <= bound) return candidate;
  return candidate + (1.0 - bound / norm) * (d.transpose().template cast<Scalar>() * residual);
}

namespace ad {

/// Differentiable DC module. candidate [N, 2, S*H, S*W] (real, imaginary),
/// lr [N, 2, H, W], sigma one value per sample. On the boundary of the ball
/// the derivative of the feasible (identity) branch is used.
Var dc_project(const Var& candidate, const Tensor& lr, const VectorXd& sigma, int factor,
               DcMode mode = DcMode::kJoint);

}  // namespace ad

}  // namespace transms
