#include "transms/dc_projection.hpp"

#include <vector>

namespace transms {

VectorXcd dc_project(const DcProblem<Complex>& p, DcMode mode) {
  if (mode == DcMode::kJoint) return dc_project<Complex>(p);
  const double part_sigma = p.sigma / std::sqrt(2.0);
  const VectorXd re = dc_project<double>({p.lr_row.real(), p.boxcar, part_sigma, p.candidate.real()});
  const VectorXd im = dc_project<double>({p.lr_row.imag(), p.boxcar, part_sigma, p.candidate.imag()});
  VectorXcd out(re.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

namespace ad {

namespace {

// Projection state of one ball: which channels it spans and, when active,
// the residual r = b - D a, its norm and the shrink factor 1 - eps / ||r||.
struct Ball {
  std::vector<Index> channels;
  bool active = false;
  VectorXd residual;
  double norm = 0.0;
  double bound = 0.0;
};

}  // namespace

Var dc_project(const Var& candidate, const Tensor& lr, const VectorXd& sigma, int factor, DcMode mode) {
  const Shape& cs = candidate.shape();
  if (cs.size() != 4 || cs[1] != 2) throw ShapeError("dc_project: candidate must be [N, 2, H, W]");
  const Index n = cs[0];
  const Grid hr{cs[3], cs[2]};
  const BoxcarOperator d(hr, factor);
  const Grid lg = d.lr();
  require_shape(lr, {n, 2, lg.height, lg.width}, "dc_project lr");
  if (sigma.size() != n) throw ShapeError("dc_project: one sigma per sample required");
  if ((sigma.array() < 0.0).any()) throw Error("dc_project: sigma must be non-negative");

  const Index m = lg.size(), hm = hr.size();
  auto hr_at = [=](Index s, Index c) { return (s * 2 + c) * hm; };
  auto lr_at = [=](Index s, Index c) { return (s * 2 + c) * m; };

  std::vector<std::vector<Index>> groups =
      mode == DcMode::kJoint ? std::vector<std::vector<Index>>{{0, 1}} : std::vector<std::vector<Index>>{{0}, {1}};
  const double group_scale = mode == DcMode::kJoint ? 1.0 : 1.0 / std::sqrt(2.0);

  Tensor out = candidate.value();
  std::vector<Ball> balls;
  for (Index s = 0; s < n; ++s)
    for (const auto& channels : groups) {
      Ball ball;
      ball.channels = channels;
      ball.bound = std::sqrt(double(m)) * sigma[s] * group_scale;
      ball.residual.resize(Index(channels.size()) * m);
      for (std::size_t k = 0; k < channels.size(); ++k) {
        const Index c = channels[k];
        ball.residual.segment(Index(k) * m, m) =
            lr.data().segment(lr_at(s, c), m) - d.apply<double>(candidate.value().data().segment(hr_at(s, c), hm));
      }
      ball.norm = ball.residual.norm();
      ball.active = ball.norm > ball.bound;
      if (ball.active) {
        const double shrink = 1.0 - ball.bound / ball.norm;
        for (std::size_t k = 0; k < channels.size(); ++k)
          out.data().segment(hr_at(s, channels[k]), hm) +=
              shrink * d.adjoint<double>(ball.residual.segment(Index(k) * m, m));
      }
      balls.push_back(std::move(ball));
    }

  return candidate.tape().record(
      std::move(out), {candidate},
      [candidate, balls, d, n, m, hm, hr_at, groups](Tape& tape, const Tensor& g) {
        Tensor* gc = tape.grad_for(candidate);
        if (!gc) return;
        gc->data() += g.data();
        std::size_t b = 0;
        for (Index s = 0; s < n; ++s)
          for (std::size_t gi = 0; gi < groups.size(); ++gi, ++b) {
            const Ball& ball = balls[b];
            if (!ball.active) continue;
            // a_hat = a + k(r) D^T r, r = b - D a, k = 1 - eps/||r||.
            // dL/dr = k D g + (eps / ||r||^3) (r . D g) r ; dL/da += -D^T dL/dr.
            const Index parts = Index(ball.channels.size());
            VectorXd dg(parts * m);
            for (Index k = 0; k < parts; ++k)
              dg.segment(k * m, m) = d.apply<double>(g.data().segment(hr_at(s, ball.channels[std::size_t(k)]), hm));
            const double shrink = 1.0 - ball.bound / ball.norm;
            const VectorXd dr = shrink * dg + (ball.bound / std::pow(ball.norm, 3)) * ball.residual.dot(dg) * ball.residual;
            for (Index k = 0; k < parts; ++k)
              gc->data().segment(hr_at(s, ball.channels[std::size_t(k)]), hm) -= d.adjoint<double>(dr.segment(k * m, m));
          }
      },
      "dc_project");
}

}  // namespace ad

}  // namespace transms
