#pragma once

#include <vector>

#include "transms/system_matrix.hpp"

namespace transms {

enum class TvBoundary {
  /// The forward difference past the last pixel is zero (constant images have TV 0).
  kNeumann,
  /// Pixels outside the grid are zero.
  kZeroPadding,
};

/// Forward differences stacked as [horizontal (N); vertical (N)].
VectorXd gradient(const VectorXd& x, Grid grid, TvBoundary boundary = TvBoundary::kNeumann);
/// Adjoint of gradient().
VectorXd gradient_adjoint(const VectorXd& d, Grid grid, TvBoundary boundary = TvBoundary::kNeumann);
/// Anisotropic total variation, sum |d_h x| + |d_v x|.
double tv(const VectorXd& x, Grid grid, TvBoundary boundary = TvBoundary::kNeumann);

/// Complex rows stacked as a real system [Re A; Im A] acting on real images.
MatrixXd stack_real(const RowMajorMatrix<Complex>& a);
VectorXd stack_real(const VectorXcd& y);

struct ReconProblem {
  MatrixXd a;  // real-stacked whitened SM, 2M x N
  VectorXd y;  // real-stacked whitened signal, 2M
  Grid grid;
  double epsilon = 0.0;
  double alpha_l1 = 0.95;
  double alpha_tv = 0.05;
  double mu = 10.0;
  int max_iterations = 2000;
  double tolerance = 1e-6;
  bool nonnegative = true;
  /// Rebalance mu every 10 iterations when one residual exceeds the other tenfold.
  bool adaptive_penalty = true;
  TvBoundary boundary = TvBoundary::kNeumann;
  /// Dense Cholesky for the x-update up to this many voxels, CG beyond.
  Index direct_limit = 2048;
  /// Cap on the feasibility restoration after the last iteration (direct path only).
  int polish_iterations = 500;

  void validate() const;
};

/// Whitened problem from an SM and a measured signal. epsilon defaults to
/// sqrt(M). Rows whose sigma is not 1 are refused unless `allow_unwhitened`.
ReconProblem make_recon_problem(const SystemMatrix& sm, const VectorXcd& signal, bool allow_unwhitened = false);

struct ReconResult {
  VectorXd x;
  Grid grid;
  std::vector<double> primal_residual;
  std::vector<double> dual_residual;
  std::vector<double> objective;  // alpha_1 ||x||_1 + alpha_TV TV(x)
  int iterations = 0;
  bool converged = false;
  double constraint_residual = 0.0;  // ||A x - y|| of the returned image
  /// Rises of the objective by more than 1e-6 relative after the first 10% of iterations.
  int objective_increases = 0;
  int polish_iterations = 0;
};

/// min alpha_1 ||x||_1 + alpha_TV TV(x) s.t. ||A x - y|| <= epsilon via
/// three-way scaled ADMM (z1 = x, z2 = grad x, z3 = A x). Inputs are scaled by
/// 1 / ||y|| internally. With nonnegativity on, the z1 prox also clamps at 0
/// and the returned image is the clamped x iterate. If that image violates
/// the bound, it is moved onto the constraint set (intersected with the
/// orthant) by alternating projections.
ReconResult admm_reconstruct(const ReconProblem& p);

struct KaczmarzResult {
  VectorXd x;
  std::vector<double> residual;  // ||A x - y|| after each sweep
  Index skipped_rows = 0;
};

/// Randomised-order row projections; negative entries are clamped to zero
/// after every sweep. Rows with energy below 1e-12 of the largest are skipped.
KaczmarzResult kaczmarz_reconstruct(const MatrixXd& a, const VectorXd& y, int sweeps, double relaxation = 1.0,
                                    std::uint64_t seed = 0, bool nonnegative = true);

}  // namespace transms
