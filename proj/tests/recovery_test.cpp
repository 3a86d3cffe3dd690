#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "transms/compressed_sensing.hpp"
#include "transms/interpolation.hpp"

using namespace transms;

namespace {

VectorXd random_map(Index n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  VectorXd v(n);
  for (Index i = 0; i < n; ++i) v[i] = g(rng);
  return v;
}

// Direct 2D Keys sum with clamped indices.
double keys_oracle(const VectorXd& map, Grid g, double xin, double yin) {
  auto k = [](double t) {
    t = std::abs(t);
    const double a = -0.5;
    if (t <= 1) return (a + 2) * t * t * t - (a + 3) * t * t + 1;
    if (t < 2) return a * t * t * t - 5 * a * t * t + 8 * a * t - 4 * a;
    return 0.0;
  };
  double acc = 0.0;
  for (Index j = Index(std::floor(yin)) - 1; j <= Index(std::floor(yin)) + 2; ++j)
    for (Index i = Index(std::floor(xin)) - 1; i <= Index(std::floor(xin)) + 2; ++i) {
      const Index ci = std::clamp<Index>(i, 0, g.width - 1), cj = std::clamp<Index>(j, 0, g.height - 1);
      acc += k(xin - double(i)) * k(yin - double(j)) * map[cj * g.width + ci];
    }
  return acc;
}

double nrmse(const VectorXcd& est, const VectorXcd& ref) { return (est - ref).norm() / ref.norm(); }

}  // namespace

TEST(Bicubic, KernelValues) {
  EXPECT_EQ(keys_kernel(0.0), 1.0);
  EXPECT_EQ(keys_kernel(1.0), 0.0);
  EXPECT_EQ(keys_kernel(2.0), 0.0);
  EXPECT_DOUBLE_EQ(keys_kernel(0.5), 0.5625);
  EXPECT_DOUBLE_EQ(keys_kernel(-1.5), -0.0625);
}

TEST(Bicubic, ConstantRowRecovered) {
  SystemMatrix lr({4, 4}, 1);
  lr.data.setConstant(Complex(2.0 * 0.8, 2.0 * -0.3));  // box-car of constant (0.8, -0.3) at S = 2
  const SystemMatrix hr = bicubic_recover(lr, 2);
  EXPECT_EQ(hr.grid, (Grid{8, 8}));
  EXPECT_LE((hr.data.array() - Complex(0.8, -0.3)).abs().maxCoeff(), 1e-14);
}

TEST(Bicubic, ReproducesLinearRampInInterior) {
  const Grid lr{10, 8};
  const int s = 2;
  auto ramp = [](double x, double y) { return 0.3 * x - 1.7 * y + 2.0; };
  VectorXd lr_map(lr.size());
  for (Index y = 0; y < lr.height; ++y)
    for (Index x = 0; x < lr.width; ++x) lr_map[y * lr.width + x] = ramp(double(x), double(y));
  const VectorXd hr = bicubic_upsample(lr_map, lr, s);
  int checked = 0;
  for (Index y = 0; y < lr.height * s; ++y)
    for (Index x = 0; x < lr.width * s; ++x) {
      const double xi = (x + 0.5) / s - 0.5, yi = (y + 0.5) / s - 0.5;
      if (xi < 1.0 || yi < 1.0 || xi > lr.width - 3.0 || yi > lr.height - 3.0) continue;
      EXPECT_NEAR(hr[y * lr.width * s + x], ramp(xi, yi), 1e-10);
      ++checked;
    }
  EXPECT_GT(checked, 10);
}

TEST(Bicubic, MatchesDirectKernelOracle) {
  const Grid g{4, 4};
  const VectorXd map = random_map(16, 3);
  for (int s : {2, 4}) {
    const VectorXd hr = bicubic_upsample(map, g, s);
    for (Index y = 0; y < 4 * s; ++y)
      for (Index x = 0; x < 4 * s; ++x)
        EXPECT_NEAR(hr[y * 4 * s + x], keys_oracle(map, g, (x + 0.5) / s - 0.5, (y + 0.5) / s - 0.5), 1e-10);
  }
}

TEST(Bicubic, ComplexPartsIndependent) {
  const Grid g{4, 4};
  const VectorXd re = random_map(16, 1), im = random_map(16, 2);
  VectorXcd c(16);
  c.real() = re;
  c.imag() = im;
  const VectorXcd out = bicubic_upsample(c, g, 2);
  EXPECT_LE((out.real() - bicubic_upsample(re, g, 2)).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_LE((out.imag() - bicubic_upsample(im, g, 2)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Bicubic, TooSmallGridRejected) {
  EXPECT_THROW(bicubic_upsample(VectorXd(VectorXd::Ones(3)), Grid{1, 3}, 2), ShapeError);
}

TEST(StridedBicubic, KeepsSamplesAndMatchesOracle) {
  const Grid hr{8, 8};
  SystemMatrix sm(hr, 1);
  const VectorXd truth = random_map(64, 5);
  sm.data.row(0) = truth.cast<Complex>().transpose();
  const MaskedSamples samples = apply_mask(sm, strided_mask(hr, 2));
  const SystemMatrix rec = strided_bicubic_recover(samples);
  VectorXd coarse(16);
  for (Index k = 0; k < 16; ++k) coarse[k] = samples.values(0, k).real();
  for (Index y = 0; y < 8; ++y)
    for (Index x = 0; x < 8; ++x) {
      const double v = rec.data(0, y * 8 + x).real();
      EXPECT_NEAR(v, keys_oracle(coarse, {4, 4}, x / 2.0, y / 2.0), 1e-10);
      if (x % 2 == 0 && y % 2 == 0) EXPECT_NEAR(v, truth[y * 8 + x], 1e-12);
    }
  EXPECT_THROW(strided_bicubic_recover(apply_mask(sm, random_mask(hr, 0.25, 1))), Error);
}

TEST(Fft2, UnitaryAndInvertible) {
  const Grid g{6, 4};
  VectorXcd x(24);
  x.real() = random_map(24, 1);
  x.imag() = random_map(24, 2);
  const VectorXcd f = fft2(x, g);
  EXPECT_NEAR(f.norm(), x.norm(), 1e-12);
  EXPECT_LE((ifft2(f, g) - x).cwiseAbs().maxCoeff(), 1e-12);
  // Direct DFT of one coefficient.
  Complex direct(0.0, 0.0);
  for (Index y = 0; y < 4; ++y)
    for (Index xx = 0; xx < 6; ++xx)
      direct += x[y * 6 + xx] * std::polar(1.0, -2.0 * M_PI * (2.0 * xx / 6.0 + 1.0 * y / 4.0));
  EXPECT_LT(std::abs(f[1 * 6 + 2] - direct / std::sqrt(24.0)), 1e-12);
}

TEST(CompressedSensing, FullMaskRecoversInput) {
  const Grid g{16, 16};
  CsProblem p;
  p.grid = g;
  p.indices = full_mask(g).indices;
  p.measured.resize(256);
  p.measured.real() = random_map(256, 7);
  p.measured.imag() = random_map(256, 8);
  const CsResult r = cs_recover(p);
  EXPECT_LE((r.row - p.measured).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(CompressedSensing, RecoversSparseFourierRow) {
  const Grid g{16, 16};
  std::mt19937_64 rng(12);
  VectorXcd spec = VectorXcd::Zero(256);
  std::uniform_int_distribution<Index> pick(0, 255);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int k = 0; k < 8;) {
    const Index i = pick(rng);
    if (spec[i] != Complex(0.0, 0.0)) continue;
    spec[i] = Complex(n(rng), n(rng));
    ++k;
  }
  const VectorXcd truth = ifft2(spec, g);
  const SamplingMask mask = random_mask(g, 0.5, 99);
  CsProblem p;
  p.grid = g;
  p.indices = mask.indices;
  p.measured.resize(Index(mask.indices.size()));
  for (std::size_t k = 0; k < mask.indices.size(); ++k) p.measured[Index(k)] = truth[mask.indices[k]];
  p.pad = 0;
  const CsResult r = cs_recover(p);
  EXPECT_LT(nrmse(r.row, truth), 0.01);
  EXPECT_LT(r.residual, 1e-6 * p.measured.norm());
}

TEST(CompressedSensing, LooseBoundGivesZeroRow) {
  const Grid g{8, 8};
  const SamplingMask mask = random_mask(g, 0.5, 3);
  CsProblem p;
  p.grid = g;
  p.indices = mask.indices;
  p.measured = random_map(Index(mask.indices.size()), 4).cast<Complex>();
  p.epsilon = p.measured.norm();
  EXPECT_LE(cs_recover(p).row.norm(), 1e-6);
}

TEST(CompressedSensing, ObjectiveMonitorAndFeasibility) {
  const Grid g{16, 16};
  const SamplingMask mask = random_mask(g, 0.4, 5);
  VectorXd smooth(256);
  for (Index y = 0; y < 16; ++y)
    for (Index x = 0; x < 16; ++x) smooth[y * 16 + x] = std::exp(-((x - 7.5) * (x - 7.5) + (y - 6.0) * (y - 6.0)) / 12.0);
  CsProblem p;
  p.grid = g;
  p.indices = mask.indices;
  p.measured.resize(Index(mask.indices.size()));
  for (std::size_t k = 0; k < mask.indices.size(); ++k) p.measured[Index(k)] = smooth[mask.indices[k]];
  p.epsilon = 0.01 * p.measured.norm();
  const CsResult r = cs_recover(p);
  int increases = 0;
  for (std::size_t k = 500; k < r.objective_trace.size(); ++k)
    increases += r.objective_trace[k] > r.objective_trace[k - 1] * (1.0 + 1e-6);
  EXPECT_EQ(increases, r.objective_increases);
  // ADMM iterates are not monotone in the objective, but they settle.
  const double tail = r.objective_trace.back(), earlier = r.objective_trace[r.objective_trace.size() - 101];
  EXPECT_LT(std::abs(tail - earlier) / tail, 1e-3);
  EXPECT_LE(r.residual, p.epsilon * (1.0 + 1e-9));
  EXPECT_LT(nrmse(r.row, smooth.cast<Complex>()), 0.05);
}

TEST(CompressedSensing, ScalesWithRowNormalisation) {
  const Grid g{8, 8};
  const SamplingMask mask = random_mask(g, 0.5, 6);
  CsProblem p;
  p.grid = g;
  p.indices = mask.indices;
  p.measured = random_map(Index(mask.indices.size()), 9).cast<Complex>();
  p.iterations = 200;
  const VectorXcd base = cs_recover(p).row;
  p.measured *= 1e-7;
  EXPECT_LE((cs_recover(p).row * 1e7 - base).cwiseAbs().maxCoeff(), 1e-9 * base.cwiseAbs().maxCoeff());
}

TEST(CompressedSensing, RejectsBadProblems) {
  CsProblem p;
  p.grid = {4, 4};
  EXPECT_THROW(cs_recover(p), Error);
  p.indices = {0, 20};
  p.measured = VectorXcd::Zero(2);
  EXPECT_THROW(cs_recover(p), Error);
}
