#pragma once

#include <vector>

#include "transms/common.hpp"

namespace transms {

/// Per-row metadata. A negative sigma means "not set".
struct RowInfo {
  std::int64_t harmonic = 0;
  double angle_deg = 0.0;
  double sigma = -1.0;
  double snr = 0.0;

  bool has_sigma() const { return sigma >= 0.0; }
  bool operator==(const RowInfo&) const = default;
};

enum SmFlags : std::uint32_t {
  kWhitened = 1u << 0,
  /// Low-resolution matrix stored in the orthonormal box-car convention.
  kOrthonormalLr = 1u << 1,
  kNoisy = 1u << 2,
};

/// Complex M x N system matrix; each row is a spatial map on `grid`.
struct SystemMatrix {
  Grid grid;
  RowMajorMatrix<Complex> data;
  std::vector<RowInfo> rows;
  std::uint32_t flags = 0;

  SystemMatrix() = default;
  SystemMatrix(Grid g, Index row_count);

  Index row_count() const { return data.rows(); }
  Index voxel_count() const { return data.cols(); }
  /// Throws when the shape and metadata disagree.
  void validate() const;
  /// Copy holding only the listed rows, in order.
  SystemMatrix select(const std::vector<Index>& row_indices) const;

  bool operator==(const SystemMatrix&) const = default;
};

}  // namespace transms
