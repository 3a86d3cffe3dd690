#pragma once

#include "transms/sampling.hpp"

namespace transms {

/// Keys cubic convolution kernel.
double keys_kernel(double t, double a = -0.5);

/// Bicubic enlargement of a map by `factor` with edge clamping. Output
/// pixel centres map to input coordinates (x + 0.5) / S - 0.5. Real and
/// imaginary parts are interpolated independently.
template <typename Scalar>
Vector<Scalar> bicubic_upsample(const Vector<Scalar>& map, Grid grid, int factor);

/// Bicubic fill-in from samples taken at HR pixels (x S, y S): output
/// pixel x maps to coarse coordinate x / S.
template <typename Scalar>
Vector<Scalar> strided_bicubic(const Vector<Scalar>& coarse, Grid coarse_grid, int factor);

/// Row-wise bicubic recovery of an orthonormal-convention LR matrix; rows
/// are divided by S first to undo the box-car gain.
SystemMatrix bicubic_recover(const SystemMatrix& lr, int factor);

/// Row-wise recovery from a strided mask of the HR matrix.
SystemMatrix strided_bicubic_recover(const MaskedSamples& samples);

}  // namespace transms
