#include "transms/interpolation.hpp"

#include <array>
#include <cmath>

namespace transms {

namespace {

// Four clamped taps and weights per output coordinate along one axis.
struct Taps {
  std::vector<std::array<Index, 4>> index;
  std::vector<std::array<double, 4>> weight;
};

Taps axis_taps(Index in, Index out, int factor, bool strided) {
  Taps t;
  for (Index o = 0; o < out; ++o) {
    const double x = strided ? double(o) / factor : (double(o) + 0.5) / factor - 0.5;
    const double base = std::floor(x);
    std::array<Index, 4> idx{};
    std::array<double, 4> w{};
    for (int k = 0; k < 4; ++k) {
      const double pos = base - 1.0 + k;
      idx[std::size_t(k)] = std::clamp<Index>(Index(pos), 0, in - 1);
      w[std::size_t(k)] = keys_kernel(x - pos);
    }
    t.index.push_back(idx);
    t.weight.push_back(w);
  }
  return t;
}

template <typename Scalar>
Vector<Scalar> separable(const Vector<Scalar>& map, Grid in, int factor, bool strided) {
  if (factor < 1) throw Error("bicubic: factor must be positive");
  if (in.width < 2 || in.height < 2) throw ShapeError("bicubic: grid needs at least 2 pixels per axis");
  if (map.size() != in.size()) throw ShapeError("bicubic: map size does not match grid");
  const Grid out{in.width * factor, in.height * factor};
  const Taps tx = axis_taps(in.width, out.width, factor, strided);
  const Taps ty = axis_taps(in.height, out.height, factor, strided);
  // Along x first, then y.
  Vector<Scalar> mid(in.height * out.width);
  for (Index y = 0; y < in.height; ++y)
    for (Index x = 0; x < out.width; ++x) {
      Scalar acc(0);
      for (int k = 0; k < 4; ++k) acc += tx.weight[std::size_t(x)][std::size_t(k)] * map[y * in.width + tx.index[std::size_t(x)][std::size_t(k)]];
      mid[y * out.width + x] = acc;
    }
  Vector<Scalar> result(out.size());
  for (Index y = 0; y < out.height; ++y)
    for (Index x = 0; x < out.width; ++x) {
      Scalar acc(0);
      for (int k = 0; k < 4; ++k) acc += ty.weight[std::size_t(y)][std::size_t(k)] * mid[ty.index[std::size_t(y)][std::size_t(k)] * out.width + x];
      result[y * out.width + x] = acc;
    }
  return result;
}

}  // namespace

double keys_kernel(double t, double a) {
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

template <typename Scalar>
Vector<Scalar> bicubic_upsample(const Vector<Scalar>& map, Grid grid, int factor) {
  return separable(map, grid, factor, false);
}

template <typename Scalar>
Vector<Scalar> strided_bicubic(const Vector<Scalar>& coarse, Grid coarse_grid, int factor) {
  return separable(coarse, coarse_grid, factor, true);
}

template Vector<double> bicubic_upsample(const Vector<double>&, Grid, int);
template Vector<Complex> bicubic_upsample(const Vector<Complex>&, Grid, int);
template Vector<double> strided_bicubic(const Vector<double>&, Grid, int);
template Vector<Complex> strided_bicubic(const Vector<Complex>&, Grid, int);

SystemMatrix bicubic_recover(const SystemMatrix& lr, int factor) {
  lr.validate();
  SystemMatrix hr({lr.grid.width * factor, lr.grid.height * factor}, lr.row_count());
  hr.rows = lr.rows;
  hr.flags = lr.flags & ~std::uint32_t(kOrthonormalLr);
  for (Index i = 0; i < lr.row_count(); ++i) {
    const VectorXcd row = lr.data.row(i).transpose() / double(factor);
    hr.data.row(i) = bicubic_upsample(row, lr.grid, factor).transpose();
  }
  return hr;
}

SystemMatrix strided_bicubic_recover(const MaskedSamples& samples) {
  const SamplingMask& mask = samples.mask;
  mask.validate();
  if (mask.kind != MaskKind::kStrided) throw Error("strided_bicubic_recover: mask is not strided");
  const int s = mask.factor;
  const Grid coarse{mask.grid.width / s, mask.grid.height / s};
  if (Index(mask.indices.size()) != coarse.size()) throw ShapeError("strided mask size does not match its grid");
  SystemMatrix hr(mask.grid, samples.values.rows());
  hr.rows = samples.rows;
  for (Index i = 0; i < samples.values.rows(); ++i) {
    const VectorXcd row = samples.values.row(i).transpose();
    hr.data.row(i) = strided_bicubic(row, coarse, s).transpose();
  }
  return hr;
}

}  // namespace transms
