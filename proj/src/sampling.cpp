#include "transms/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace transms {

SystemMatrix::SystemMatrix(Grid g, Index row_count)
    : grid(g), data(RowMajorMatrix<Complex>::Zero(row_count, g.size())), rows(std::size_t(row_count)) {}

void SystemMatrix::validate() const {
  if (grid.width < 1 || grid.height < 1) throw ShapeError("system matrix grid must be non-empty");
  if (data.cols() != grid.size())
    throw ShapeError("system matrix has " + std::to_string(data.cols()) + " columns for a " +
                     std::to_string(grid.width) + "x" + std::to_string(grid.height) + " grid");
  if (Index(rows.size()) != data.rows()) throw ShapeError("row metadata length differs from row count");
}

SystemMatrix SystemMatrix::select(const std::vector<Index>& row_indices) const {
  SystemMatrix out(grid, Index(row_indices.size()));
  out.flags = flags;
  for (std::size_t k = 0; k < row_indices.size(); ++k) {
    const Index i = row_indices[k];
    if (i < 0 || i >= row_count()) throw ShapeError("row index out of range");
    out.data.row(Index(k)) = data.row(i);
    out.rows[k] = rows[std::size_t(i)];
  }
  return out;
}

BoxcarOperator::BoxcarOperator(Grid hr, int factor) : hr_(hr), factor_(factor) {
  if (factor < 1) throw ShapeError("box-car factor must be positive");
  if (hr.width % factor != 0 || hr.height % factor != 0)
    throw ShapeError("HR grid " + std::to_string(hr.width) + "x" + std::to_string(hr.height) +
                     " is not divisible by factor " + std::to_string(factor));
}

template <typename Scalar>
Vector<Scalar> BoxcarOperator::apply(const Eigen::Ref<const Vector<Scalar>>& hr_map) const {
  if (hr_map.size() != hr_.size()) throw ShapeError("box-car input does not match the HR grid");
  const Grid g = lr();
  Vector<Scalar> out = Vector<Scalar>::Zero(g.size());
  for (Index y = 0; y < hr_.height; ++y)
    for (Index x = 0; x < hr_.width; ++x) out[(y / factor_) * g.width + x / factor_] += hr_map[y * hr_.width + x];
  return out * row_scale();
}

template <typename Scalar>
Vector<Scalar> BoxcarOperator::adjoint(const Eigen::Ref<const Vector<Scalar>>& lr_map) const {
  const Grid g = lr();
  if (lr_map.size() != g.size()) throw ShapeError("box-car adjoint input does not match the LR grid");
  Vector<Scalar> out(hr_.size());
  for (Index y = 0; y < hr_.height; ++y)
    for (Index x = 0; x < hr_.width; ++x)
      out[y * hr_.width + x] = lr_map[(y / factor_) * g.width + x / factor_] * row_scale();
  return out;
}

template Vector<double> BoxcarOperator::apply<double>(const Eigen::Ref<const Vector<double>>&) const;
template Vector<Complex> BoxcarOperator::apply<Complex>(const Eigen::Ref<const Vector<Complex>>&) const;
template Vector<double> BoxcarOperator::adjoint<double>(const Eigen::Ref<const Vector<double>>&) const;
template Vector<Complex> BoxcarOperator::adjoint<Complex>(const Eigen::Ref<const Vector<Complex>>&) const;

MatrixXd BoxcarOperator::dense() const {
  const Grid g = lr();
  MatrixXd d = MatrixXd::Zero(g.size(), hr_.size());
  for (Index y = 0; y < hr_.height; ++y)
    for (Index x = 0; x < hr_.width; ++x) d((y / factor_) * g.width + x / factor_, y * hr_.width + x) = row_scale();
  return d;
}

SystemMatrix boxcar_downsample(const SystemMatrix& hr, int factor) {
  hr.validate();
  const BoxcarOperator d(hr.grid, factor);
  SystemMatrix out(d.lr(), hr.row_count());
  out.rows = hr.rows;
  out.flags = hr.flags | kOrthonormalLr;
  for (Index i = 0; i < hr.row_count(); ++i) out.data.row(i) = d.apply<Complex>(hr.data.row(i).transpose()).transpose();
  return out;
}

SystemMatrix ingest_sum_convention(const SystemMatrix& lr_sum, int factor) {
  lr_sum.validate();
  if (factor < 1) throw ShapeError("box-car factor must be positive");
  SystemMatrix out = lr_sum;
  out.data /= double(factor);
  for (RowInfo& r : out.rows)
    if (r.has_sigma()) r.sigma /= double(factor);
  out.flags |= kOrthonormalLr;
  return out;
}

VectorXd sigma_for_snr(const SystemMatrix& sm, double snr_db) {
  const double ratio = std::pow(10.0, snr_db / 20.0);
  VectorXd sigma(sm.row_count());
  for (Index i = 0; i < sm.row_count(); ++i)
    sigma[i] = sm.data.row(i).norm() / (std::sqrt(double(sm.voxel_count())) * ratio);
  return sigma;
}

RowMajorMatrix<Complex> complex_noise(Index rows, Index cols, const VectorXd& sigma, std::uint64_t seed) {
  if (sigma.size() != rows) throw ShapeError("noise sigma length differs from row count");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  RowMajorMatrix<Complex> n(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const double s = sigma[i] / std::sqrt(2.0);
    for (Index j = 0; j < cols; ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      n(i, j) = Complex(s * re, s * im);
    }
  }
  return n;
}

SystemMatrix add_calibration_noise(const SystemMatrix& sm, const NoiseSpec& spec, std::uint64_t seed) {
  sm.validate();
  VectorXd sigma;
  if (spec.snr_db) {
    sigma = sigma_for_snr(sm, *spec.snr_db);
  } else if (spec.sigma) {
    sigma = *spec.sigma;
    if (sigma.size() != sm.row_count()) throw ShapeError("noise sigma length differs from row count");
    if ((sigma.array() < 0.0).any()) throw Error("noise sigma must be non-negative");
  } else {
    throw Error("noise specification needs an SNR target or per-row sigma");
  }
  SystemMatrix out = sm;
  out.data += complex_noise(sm.row_count(), sm.voxel_count(), sigma, seed);
  for (Index i = 0; i < sm.row_count(); ++i) out.rows[std::size_t(i)].sigma = sigma[i];
  out.flags |= kNoisy;
  return out;
}

Whitened whiten(const SystemMatrix& sm, const std::optional<VectorXcd>& signal) {
  sm.validate();
  if (signal && signal->size() != sm.row_count()) throw ShapeError("signal length differs from SM row count");
  Whitened out{sm, signal};
  for (Index i = 0; i < sm.row_count(); ++i) {
    const double s = sm.rows[std::size_t(i)].sigma;
    if (!(s > 0.0)) throw Error("whiten: row " + std::to_string(i) + " has no positive noise sigma");
    out.sm.data.row(i) /= s;
    if (out.signal) (*out.signal)[i] /= s;
    out.sm.rows[std::size_t(i)].sigma = 1.0;
  }
  out.sm.flags |= kWhitened;
  return out;
}

VectorXd row_snr(const SystemMatrix& sm) {
  sm.validate();
  VectorXd snr(sm.row_count());
  const double root_n = std::sqrt(double(sm.voxel_count()));
  for (Index i = 0; i < sm.row_count(); ++i) {
    const RowInfo& info = sm.rows[std::size_t(i)];
    if (!info.has_sigma()) throw Error("row_snr: row " + std::to_string(i) + " has no noise sigma");
    snr[i] = info.sigma == 0.0 ? std::numeric_limits<double>::infinity()
                               : sm.data.row(i).norm() / (root_n * info.sigma);
  }
  return snr;
}

SystemMatrix select_rows_by_snr(const SystemMatrix& sm, double threshold) {
  const VectorXd snr = row_snr(sm);
  std::vector<Index> keep;
  for (Index i = 0; i < snr.size(); ++i)
    if (snr[i] > threshold) keep.push_back(i);
  SystemMatrix out = sm.select(keep);
  for (std::size_t k = 0; k < keep.size(); ++k) out.rows[k].snr = snr[keep[k]];
  return out;
}

void SamplingMask::validate() const {
  for (std::size_t k = 0; k < indices.size(); ++k) {
    if (indices[k] < 0 || indices[k] >= grid.size()) throw ShapeError("mask index out of range");
    if (k > 0 && indices[k] <= indices[k - 1]) throw ShapeError("mask indices must be sorted and unique");
  }
}

SamplingMask full_mask(Grid grid) {
  SamplingMask m{MaskKind::kFull, grid, std::vector<Index>(std::size_t(grid.size())), 1, 0};
  std::iota(m.indices.begin(), m.indices.end(), Index(0));
  return m;
}

SamplingMask strided_mask(Grid grid, int factor) {
  if (factor < 1 || grid.width % factor != 0 || grid.height % factor != 0)
    throw ShapeError("strided mask factor must divide the grid");
  SamplingMask m{MaskKind::kStrided, grid, {}, factor, 0};
  for (Index y = 0; y < grid.height; y += factor)
    for (Index x = 0; x < grid.width; x += factor) m.indices.push_back(y * grid.width + x);
  return m;
}

SamplingMask random_mask(Grid grid, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw Error("random mask ratio must lie in (0, 1]");
  const Index keep = std::max<Index>(1, Index(std::llround(ratio * double(grid.size()))));
  std::vector<Index> all(std::size_t(grid.size()));
  std::iota(all.begin(), all.end(), Index(0));
  std::mt19937_64 rng(seed);
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(std::size_t(keep));
  std::sort(all.begin(), all.end());
  return SamplingMask{MaskKind::kRandom, grid, std::move(all), 1, seed};
}

MaskedSamples apply_mask(const SystemMatrix& sm, const SamplingMask& mask) {
  sm.validate();
  mask.validate();
  if (!(mask.grid == sm.grid)) throw ShapeError("mask grid differs from SM grid");
  MaskedSamples out{mask, RowMajorMatrix<Complex>(sm.row_count(), Index(mask.indices.size())), sm.rows};
  for (std::size_t k = 0; k < mask.indices.size(); ++k) out.values.col(Index(k)) = sm.data.col(mask.indices[k]);
  return out;
}

template <typename Scalar>
Vector<Scalar> flip_horizontal(const Vector<Scalar>& map, Grid grid) {
  Vector<Scalar> out(map.size());
  for (Index y = 0; y < grid.height; ++y)
    for (Index x = 0; x < grid.width; ++x) out[y * grid.width + x] = map[y * grid.width + (grid.width - 1 - x)];
  return out;
}

template <typename Scalar>
Vector<Scalar> flip_vertical(const Vector<Scalar>& map, Grid grid) {
  Vector<Scalar> out(map.size());
  for (Index y = 0; y < grid.height; ++y)
    out.segment(y * grid.width, grid.width) = map.segment((grid.height - 1 - y) * grid.width, grid.width);
  return out;
}

template Vector<double> flip_horizontal(const Vector<double>&, Grid);
template Vector<Complex> flip_horizontal(const Vector<Complex>&, Grid);
template Vector<double> flip_vertical(const Vector<double>&, Grid);
template Vector<Complex> flip_vertical(const Vector<Complex>&, Grid);

SystemMatrix augment_flips(const SystemMatrix& sm) {
  sm.validate();
  SystemMatrix out(sm.grid, 4 * sm.row_count());
  out.flags = sm.flags;
  for (Index i = 0; i < sm.row_count(); ++i) {
    const VectorXcd row = sm.data.row(i).transpose();
    const VectorXcd h = flip_horizontal(row, sm.grid);
    out.data.row(4 * i) = row.transpose();
    out.data.row(4 * i + 1) = h.transpose();
    out.data.row(4 * i + 2) = flip_vertical(row, sm.grid).transpose();
    out.data.row(4 * i + 3) = flip_vertical(h, sm.grid).transpose();
    for (int k = 0; k < 4; ++k) out.rows[std::size_t(4 * i + k)] = sm.rows[std::size_t(i)];
  }
  return out;
}

RowMajorMatrix<Complex> background_mean(const std::vector<RowMajorMatrix<Complex>>& scans) {
  if (scans.empty()) throw Error("background_mean: no scans");
  RowMajorMatrix<Complex> mean = RowMajorMatrix<Complex>::Zero(scans.front().rows(), scans.front().cols());
  for (const auto& s : scans) {
    if (s.rows() != mean.rows() || s.cols() != mean.cols()) throw ShapeError("background scans differ in shape");
    mean += s;
  }
  return mean / double(scans.size());
}

SystemMatrix subtract_background(const SystemMatrix& sm, const RowMajorMatrix<Complex>& background) {
  sm.validate();
  if (background.rows() != sm.row_count() || background.cols() != sm.voxel_count())
    throw ShapeError("background shape differs from SM shape");
  SystemMatrix out = sm;
  out.data -= background;
  return out;
}

}  // namespace transms
