#include "transms/reconstruction.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "transms/dc_projection.hpp"

namespace transms {

namespace {

double soft(double v, double t) { return v > t ? v - t : (v < -t ? v + t : 0.0); }

// Largest singular value by power iteration on A^T A from a fixed start.
double spectral_norm(const MatrixXd& a) {
  VectorXd v = VectorXd::Ones(a.cols()).normalized();
  double sigma = 0.0;
  for (int it = 0; it < 100; ++it) {
    const VectorXd w = a.transpose() * (a * v);
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    const double next = std::sqrt(norm);
    v = w / norm;
    if (std::abs(next - sigma) <= 1e-10 * next) return next;
    sigma = next;
  }
  return sigma;
}

// Euclidean projection onto {x : ||A x - y|| <= eps}. The minimiser of
// ||x - x0||^2 + lambda ||A x - y||^2 is diagonal in the eigenbasis of A^T A,
// and the residual decreases in lambda, so lambda is found by bisection.
class ConstraintProjector {
 public:
  ConstraintProjector(const MatrixXd& a, const VectorXd& y) : a_(a), y_(y) {
    eig_.compute(a.transpose() * a);
    if (eig_.info() != Eigen::Success) throw NumericError("reconstruction: eigendecomposition failed");
    b_ = eig_.eigenvectors().transpose() * (a.transpose() * y);
    lambda_ = eig_.eigenvalues().cwiseMax(0.0);
  }

  VectorXd project(const VectorXd& x0, double eps) const {
    if ((a_ * x0 - y_).norm() <= eps) return x0;
    const VectorXd w = eig_.eigenvectors().transpose() * x0;
    const double yy = y_.squaredNorm();
    auto coeffs = [&](double l) -> VectorXd {
      return ((w + l * b_).array() / (1.0 + l * lambda_.array())).matrix();
    };
    auto residual_sq = [&](const VectorXd& c) {
      return (lambda_.array() * c.array().square()).sum() - 2.0 * c.dot(b_) + yy;
    };
    const double target = eps * eps * (1.0 - 1e-9);
    double lo = 0.0, hi = 1.0;
    while (residual_sq(coeffs(hi)) > target && hi < 1e300) hi *= 4.0;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
      const double mid = 0.5 * (lo + hi);
      (residual_sq(coeffs(mid)) > target ? lo : hi) = mid;
    }
    return eig_.eigenvectors() * coeffs(hi);
  }

 private:
  const MatrixXd& a_;
  const VectorXd& y_;
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig_;
  VectorXd b_;
  VectorXd lambda_;
};

}  // namespace

VectorXd gradient(const VectorXd& x, Grid grid, TvBoundary boundary) {
  if (x.size() != grid.size()) throw ShapeError("gradient: image does not match grid");
  const Index w = grid.width, h = grid.height, n = grid.size();
  VectorXd d = VectorXd::Zero(2 * n);
  const bool pad = boundary == TvBoundary::kZeroPadding;
  for (Index y = 0; y < h; ++y)
    for (Index xx = 0; xx < w; ++xx) {
      const Index i = y * w + xx;
      if (xx + 1 < w) d[i] = x[i + 1] - x[i];
      else if (pad) d[i] = -x[i];
      if (y + 1 < h) d[n + i] = x[i + w] - x[i];
      else if (pad) d[n + i] = -x[i];
    }
  return d;
}

VectorXd gradient_adjoint(const VectorXd& d, Grid grid, TvBoundary boundary) {
  const Index w = grid.width, h = grid.height, n = grid.size();
  if (d.size() != 2 * n) throw ShapeError("gradient_adjoint: size mismatch");
  VectorXd x = VectorXd::Zero(n);
  const bool pad = boundary == TvBoundary::kZeroPadding;
  for (Index y = 0; y < h; ++y)
    for (Index xx = 0; xx < w; ++xx) {
      const Index i = y * w + xx;
      if (xx + 1 < w) {
        x[i + 1] += d[i];
        x[i] -= d[i];
      } else if (pad) {
        x[i] -= d[i];
      }
      if (y + 1 < h) {
        x[i + w] += d[n + i];
        x[i] -= d[n + i];
      } else if (pad) {
        x[i] -= d[n + i];
      }
    }
  return x;
}

double tv(const VectorXd& x, Grid grid, TvBoundary boundary) { return gradient(x, grid, boundary).lpNorm<1>(); }

MatrixXd stack_real(const RowMajorMatrix<Complex>& a) {
  MatrixXd out(2 * a.rows(), a.cols());
  out.topRows(a.rows()) = a.real();
  out.bottomRows(a.rows()) = a.imag();
  return out;
}

VectorXd stack_real(const VectorXcd& y) {
  VectorXd out(2 * y.size());
  out << y.real(), y.imag();
  return out;
}

void ReconProblem::validate() const {
  if (a.cols() != grid.size()) throw ShapeError("reconstruction: SM columns do not match the grid");
  if (a.rows() != y.size()) throw ShapeError("reconstruction: SM rows do not match the signal length");
  if (!(epsilon >= 0.0)) throw ConfigError("reconstruction: epsilon must be non-negative", "epsilon");
  if (alpha_l1 < 0.0 || alpha_tv < 0.0 || alpha_l1 + alpha_tv <= 0.0)
    throw ConfigError("reconstruction: regularisation weights must be non-negative and not both zero", "alpha_l1");
  if (!(mu > 0.0)) throw ConfigError("reconstruction: mu must be positive", "mu");
  if (max_iterations < 1) throw ConfigError("reconstruction: max_iterations must be positive", "max_iterations");
  if (!a.allFinite() || !y.allFinite()) throw NumericError("reconstruction: non-finite input");
}

ReconProblem make_recon_problem(const SystemMatrix& sm, const VectorXcd& signal, bool allow_unwhitened) {
  sm.validate();
  if (signal.size() != sm.row_count()) throw ShapeError("reconstruction: signal length differs from SM rows");
  if (!allow_unwhitened)
    for (std::size_t i = 0; i < sm.rows.size(); ++i)
      if (sm.rows[i].sigma != 1.0)
        throw Error("reconstruction: row " + std::to_string(i) + " is not whitened (sigma != 1)");
  ReconProblem p;
  p.a = stack_real(sm.data);
  p.y = stack_real(signal);
  p.grid = sm.grid;
  p.epsilon = std::sqrt(double(sm.row_count()));
  return p;
}

ReconResult admm_reconstruct(const ReconProblem& p) {
  p.validate();
  const Index n = p.grid.size(), m = p.a.rows();
  ReconResult r;
  r.grid = p.grid;
  const double ynorm = p.y.norm();
  if (ynorm == 0.0 || ynorm <= p.epsilon) {
    // x = 0 is feasible and minimises the objective.
    r.x = VectorXd::Zero(n);
    r.converged = true;
    r.constraint_residual = ynorm;
    return r;
  }
  const VectorXd y = p.y / ynorm;
  const double eps = p.epsilon / ynorm;
  // Solve for x' = c x with A' = A / c, c the spectral norm of A; the
  // objective is positively homogeneous so the minimiser only rescales.
  const double c = spectral_norm(p.a);
  if (c == 0.0) throw Error("reconstruction: SM is zero but the signal exceeds epsilon");
  const MatrixXd a = p.a / c;

  auto grad = [&](const VectorXd& v) { return gradient(v, p.grid, p.boundary); };
  auto grad_t = [&](const VectorXd& v) { return gradient_adjoint(v, p.grid, p.boundary); };
  auto normal = [&](const VectorXd& v) -> VectorXd { return v + grad_t(grad(v)) + a.transpose() * (a * v); };

  Eigen::LLT<MatrixXd> llt;
  const bool direct = n <= p.direct_limit;
  if (direct) {
    MatrixXd k = a.transpose() * a;
    k.diagonal().array() += 1.0;
    for (Index j = 0; j < n; ++j) {
      VectorXd e = VectorXd::Zero(n);
      e[j] = 1.0;
      k.col(j) += grad_t(grad(e));
    }
    llt.compute(k);
    if (llt.info() != Eigen::Success) throw NumericError("reconstruction: normal matrix factorisation failed");
  }

  VectorXd x = VectorXd::Zero(n), z1 = x, u1 = x;
  VectorXd z2 = VectorXd::Zero(2 * n), u2 = z2;
  VectorXd z3 = y, u3 = VectorXd::Zero(m);
  double mu = p.mu;
  const int burn_in = std::max(1, p.max_iterations / 10);

  for (int it = 0; it < p.max_iterations; ++it) {
    const VectorXd rhs = (z1 - u1) + grad_t(z2 - u2) + a.transpose() * (z3 - u3);
    if (direct) {
      x = llt.solve(rhs);
    } else {
      // Warm-started conjugate gradients.
      VectorXd res = rhs - normal(x), dir = res;
      double rr = res.squaredNorm();
      const double stop = 1e-16 * std::max(rhs.squaredNorm(), 1e-300);
      for (Index k = 0; k < n && rr > stop; ++k) {
        const VectorXd q = normal(dir);
        const double step = rr / dir.dot(q);
        x += step * dir;
        res -= step * q;
        const double next = res.squaredNorm();
        dir = res + (next / rr) * dir;
        rr = next;
      }
    }
    const VectorXd gx = grad(x), ax = a * x;
    const VectorXd z1_old = z1, z2_old = z2, z3_old = z3;
    const double t1 = p.alpha_l1 / mu, t2 = p.alpha_tv / mu;
    z1 = (x + u1).unaryExpr([&](double v) { return p.nonnegative ? std::max(v - t1, 0.0) : soft(v, t1); });
    z2 = (gx + u2).unaryExpr([&](double v) { return soft(v, t2); });
    z3 = project_to_ball<double>(ax + u3, y, eps);
    u1 += x - z1;
    u2 += gx - z2;
    u3 += ax - z3;

    const double primal =
        std::sqrt((x - z1).squaredNorm() + (gx - z2).squaredNorm() + (ax - z3).squaredNorm());
    const double dual =
        mu * ((z1 - z1_old) + grad_t(z2 - z2_old) + a.transpose() * (z3 - z3_old)).norm();
    if (!std::isfinite(primal) || !std::isfinite(dual)) throw NumericError("reconstruction: ADMM diverged");
    r.primal_residual.push_back(primal);
    r.dual_residual.push_back(dual);
    r.objective.push_back(p.alpha_l1 * x.lpNorm<1>() + p.alpha_tv * gx.lpNorm<1>());
    if (it >= burn_in && r.objective[std::size_t(it)] > r.objective[std::size_t(it - 1)] * (1.0 + 1e-6))
      ++r.objective_increases;
    r.iterations = it + 1;
    if (it > 0 && primal < p.tolerance && dual < p.tolerance) {
      r.converged = true;
      break;
    }
    if (p.adaptive_penalty && it % 10 == 9) {
      // Residual balancing; scaled duals follow the penalty.
      double factor = 1.0;
      if (primal > 10.0 * dual) factor = 2.0;
      else if (dual > 10.0 * primal) factor = 0.5;
      if (factor != 1.0) {
        mu *= factor;
        u1 /= factor;
        u2 /= factor;
        u3 /= factor;
      }
    }
  }
  if (p.nonnegative) x = x.cwiseMax(0.0);
  if (direct && (a * x - y).norm() > eps) {
    // Restore feasibility: Dykstra alternation between the constraint set and,
    // with nonnegativity, the orthant, stopping once the clamped point is feasible.
    const ConstraintProjector ball(a, y);
    if (!p.nonnegative) {
      x = ball.project(x, eps);
    } else {
      VectorXd pb = VectorXd::Zero(n), qb = VectorXd::Zero(n);
      for (int k = 0; k < p.polish_iterations; ++k) {
        const VectorXd yk = ball.project(x + pb, eps);
        pb = x + pb - yk;
        const VectorXd next = (yk + qb).cwiseMax(0.0);
        qb = yk + qb - next;
        x = next;
        r.polish_iterations = k + 1;
        if ((a * x - y).norm() <= eps * (1.0 + 1e-4)) break;
      }
    }
  }
  r.x = x * (ynorm / c);
  r.constraint_residual = (p.a * r.x - p.y).norm();
  for (double& v : r.objective) v *= ynorm / c;
  return r;
}

KaczmarzResult kaczmarz_reconstruct(const MatrixXd& a, const VectorXd& y, int sweeps, double relaxation,
                                    std::uint64_t seed, bool nonnegative) {
  if (a.rows() != y.size()) throw ShapeError("kaczmarz: SM rows do not match the signal length");
  if (sweeps < 1) throw ConfigError("kaczmarz: sweeps must be positive", "sweeps");
  if (!(relaxation > 0.0 && relaxation < 2.0)) throw ConfigError("kaczmarz: relaxation must lie in (0, 2)", "relaxation");
  KaczmarzResult r;
  r.x = VectorXd::Zero(a.cols());
  const VectorXd energy = a.rowwise().squaredNorm();
  // Rows this far below the strongest one are numerically zero.
  const double floor = 1e-12 * (energy.size() ? energy.maxCoeff() : 0.0);
  std::vector<Index> order;
  for (Index i = 0; i < a.rows(); ++i) {
    if (energy[i] > floor) order.push_back(i);
    else ++r.skipped_rows;
  }
  std::mt19937_64 rng(seed);
  for (int s = 0; s < sweeps; ++s) {
    std::shuffle(order.begin(), order.end(), rng);
    for (Index i : order) r.x += (relaxation * (y[i] - a.row(i).dot(r.x)) / energy[i]) * a.row(i).transpose();
    if (nonnegative) r.x = r.x.cwiseMax(0.0);
    r.residual.push_back((a * r.x - y).norm());
  }
  return r;
}

}  // namespace transms
