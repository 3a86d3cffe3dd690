#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "transms/system_matrix.hpp"

namespace transms {

/// 2D rotating field-free-line scanner. Positions are in mm with the origin
/// at the FOV centre; voxel (x, y) spans [x dx, (x+1) dx) from the FOV corner.
struct ScannerConfig {
  double fov_x_mm = 32.0;
  double fov_y_mm = 32.0;
  Grid grid{32, 32};
  double diameter_nm = 25.0;
  double saturation_t = 0.55;  // T / mu0
  double temperature_k = 300.0;
  double gradient_t_per_m = 1.0;
  double drive_frequency_hz = 23.2e3;
  /// Drive amplitude along z; unset means G * max(FOV) / 2 so the sweep covers the FOV.
  std::optional<double> drive_amplitude_mt;
  double sampling_rate_hz = 5e6;
  std::vector<double> angles_deg = default_angles(60);
  int harmonic_min = 2;
  int harmonic_max = 9;
  /// Drive periods simulated per angle; harmonic k lands on bin k * periods.
  int periods = 1;
  /// Bins kept around each harmonic (at most `periods`).
  int bins_per_harmonic = 1;
  /// Sub-positions per axis averaged over each voxel footprint.
  int supersampling = 4;
  /// Particle concentration of the calibration sample (arbitrary units).
  double concentration = 1.0;
  std::uint64_t seed = 0;

  /// n equispaced angles over [0, 180).
  static std::vector<double> default_angles(int n);

  void validate() const;
  double drive_amplitude() const;  // mT
  /// Samples per simulated window; the drive period holds an integer count.
  Index samples_per_angle() const;
  Index row_count() const;
  double voxel_x_mm() const { return fov_x_mm / double(grid.width); }
  double voxel_y_mm() const { return fov_y_mm / double(grid.height); }
  /// Particle moment over k_B T, per tesla.
  double langevin_scale() const;
};

/// coth(xi) - 1/xi with a series near 0.
double langevin(double xi);
/// d/dxi of langevin.
double langevin_derivative(double xi);

/// Induced z-voltage of a point sample of unit concentration at (x, y) mm
/// while the FFL sits at `angle_deg`, in units of the particle moment times
/// drive angular frequency. Does not validate the configuration.
VectorXd point_time_signal(const ScannerConfig& config, double x_mm, double y_mm, double angle_deg);

/// Unitary DFT of a time signal (Parseval holds without scaling).
VectorXcd spectrum(const VectorXd& signal);

/// DFT bins kept for each row, in row order (harmonic-major within an angle).
std::vector<Index> kept_bins(const ScannerConfig& config);

/// Calibration with a square sample of `sample_cells` x `sample_cells` HR
/// voxels stepped over the FOV without overlap. The result lives on the
/// grid W / sample_cells x H / sample_cells, and each column equals the sum
/// of the constituent single-voxel columns (sum convention).
SystemMatrix simulate_sm(const ScannerConfig& config, int sample_cells = 1);

/// Same matrix for a sample size in mm; must be an integer number of voxels.
SystemMatrix simulate_sm(const ScannerConfig& config, double sample_x_mm, double sample_y_mm);

struct Phantom {
  Grid grid;
  VectorXd concentration;  // y * W + x, non-negative
  std::string description;

  void validate() const;
};

/// Measurement of a phantom computed directly from the field model (time
/// superposition over voxels, then DFT), independent of any system matrix.
VectorXcd simulate_measurement(const ScannerConfig& config, const Phantom& phantom);

struct SignalNoise {
  std::optional<double> snr_db;  // per-entry SNR, sigma_i = |y_i| / 10^(snr/20)
  /// Receiver noise std per row; takes precedence over snr_db.
  std::optional<VectorXd> sigma;
  std::uint64_t seed = 0;
};

struct SimulatedSignal {
  VectorXcd y;
  VectorXd sigma;  // per-entry noise std (0 when noiseless)
};

/// y = A x plus optional circular Gaussian noise with per-entry std.
SimulatedSignal simulate_signal(const SystemMatrix& sm, const Phantom& phantom, const SignalNoise& noise = {});

}  // namespace transms
