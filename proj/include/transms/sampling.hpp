#pragma once

#include <optional>
#include <vector>

#include "transms/system_matrix.hpp"

namespace transms {

/// Orthonormal S x S box-car downsampling D: each LR pixel is 1/S times the
/// sum of its HR block, so D * D^T = I.
class BoxcarOperator {
 public:
  BoxcarOperator(Grid hr, int factor);

  int factor() const { return factor_; }
  const Grid& hr() const { return hr_; }
  Grid lr() const { return {hr_.width / factor_, hr_.height / factor_}; }
  double row_scale() const { return 1.0 / factor_; }

  /// D * hr_map
  template <typename Scalar>
  Vector<Scalar> apply(const Eigen::Ref<const Vector<Scalar>>& hr_map) const;
  /// D^T * lr_map
  template <typename Scalar>
  Vector<Scalar> adjoint(const Eigen::Ref<const Vector<Scalar>>& lr_map) const;

  /// Explicit (W*H) x (W_hr*H_hr) matrix.
  MatrixXd dense() const;

 private:
  Grid hr_;
  int factor_;
};

/// Retrospective LR matrix B = A D^T. Noise std per entry is unchanged
/// under the orthonormal convention, so sigma metadata is copied.
SystemMatrix boxcar_downsample(const SystemMatrix& hr, int factor);

/// Converts a physically measured LR matrix (block sums, entries 1) to the
/// orthonormal convention: values and sigma scaled by 1/S.
SystemMatrix ingest_sum_convention(const SystemMatrix& lr_sum, int factor);

struct NoiseSpec {
  /// Target per-row SNR in dB, SNR_i = ||a_i|| / (sqrt(N) sigma_i).
  std::optional<double> snr_db;
  /// Explicit per-row sigma (used when snr_db is empty).
  std::optional<VectorXd> sigma;
};

/// Per-row noise std for a target SNR: sigma_i = ||a_i|| / (sqrt(N) 10^(snr/20)).
VectorXd sigma_for_snr(const SystemMatrix& sm, double snr_db);

/// Adds independent circular complex Gaussian noise (E|n|^2 = sigma_i^2).
/// Records sigma_i in the row metadata.
SystemMatrix add_calibration_noise(const SystemMatrix& sm, const NoiseSpec& spec, std::uint64_t seed);

/// Draws circular complex Gaussian noise with per-row std.
RowMajorMatrix<Complex> complex_noise(Index rows, Index cols, const VectorXd& sigma, std::uint64_t seed);

struct Whitened {
  SystemMatrix sm;
  std::optional<VectorXcd> signal;
};

/// Scales row i (and signal entry i) by 1/sigma_i; sigma reset to 1.
Whitened whiten(const SystemMatrix& sm, const std::optional<VectorXcd>& signal = std::nullopt);

/// SNR_i = ||a_i|| / (sqrt(N) sigma_i); +inf when sigma_i = 0.
VectorXd row_snr(const SystemMatrix& sm);

/// Keeps rows with SNR_i > threshold in their original order and stores the
/// estimate in the row metadata.
SystemMatrix select_rows_by_snr(const SystemMatrix& sm, double threshold = 5.0);

enum class MaskKind { kStrided, kRandom, kFull };

struct SamplingMask {
  MaskKind kind = MaskKind::kFull;
  Grid grid;
  std::vector<Index> indices;  // sorted, unique voxel indices
  int factor = 1;
  std::uint64_t seed = 0;

  void validate() const;
};

SamplingMask full_mask(Grid grid);
/// Keeps voxels (x, y) with x % S == 0 and y % S == 0.
SamplingMask strided_mask(Grid grid, int factor);
/// Keeps round(ratio * N) voxels chosen uniformly without replacement.
SamplingMask random_mask(Grid grid, double ratio, std::uint64_t seed);

struct MaskedSamples {
  SamplingMask mask;
  RowMajorMatrix<Complex> values;  // M x |mask|
  std::vector<RowInfo> rows;
};

MaskedSamples apply_mask(const SystemMatrix& sm, const SamplingMask& mask);

template <typename Scalar>
Vector<Scalar> flip_horizontal(const Vector<Scalar>& map, Grid grid);
template <typename Scalar>
Vector<Scalar> flip_vertical(const Vector<Scalar>& map, Grid grid);

/// Emits, for every row, the row followed by its H-, V- and HV-flips.
SystemMatrix augment_flips(const SystemMatrix& sm);

/// Mean of repeated empty scans, used for background subtraction.
RowMajorMatrix<Complex> background_mean(const std::vector<RowMajorMatrix<Complex>>& scans);
SystemMatrix subtract_background(const SystemMatrix& sm, const RowMajorMatrix<Complex>& background);

}  // namespace transms
