#include "transms/scanner.hpp"

#include <cmath>
#include <numbers>

#include "transms/parallel.hpp"
#include "transms/sampling.hpp"

namespace transms {

namespace {

constexpr double kMu0 = 4e-7 * std::numbers::pi;
constexpr double kBoltzmann = 1.380649e-23;

// Kept-bin DFT rows, already scaled by 1/sqrt(n).
RowMajorMatrix<Complex> kept_dft(const ScannerConfig& config) {
  const Index n = config.samples_per_angle();
  const std::vector<Index> bins = kept_bins(config);
  const Index per_angle = Index(bins.size()) / Index(config.angles_deg.size());
  RowMajorMatrix<Complex> w(per_angle, n);
  const double norm = 1.0 / std::sqrt(double(n));
  for (Index r = 0; r < per_angle; ++r)
    for (Index k = 0; k < n; ++k) {
      const double phase = -2.0 * std::numbers::pi * double((bins[std::size_t(r)] * k) % n) / double(n);
      w(r, k) = norm * Complex(std::cos(phase), std::sin(phase));
    }
  return w;
}

// Footprint-averaged time signal of voxel (x, y) at one FFL angle.
VectorXd voxel_time_signal(const ScannerConfig& config, Index x, Index y, double angle_deg) {
  const double dx = config.voxel_x_mm(), dy = config.voxel_y_mm();
  const int ss = config.supersampling;
  VectorXd acc = VectorXd::Zero(config.samples_per_angle());
  for (int sy = 0; sy < ss; ++sy)
    for (int sx = 0; sx < ss; ++sx) {
      const double px = (double(x) + (sx + 0.5) / ss) * dx - 0.5 * config.fov_x_mm;
      const double py = (double(y) + (sy + 0.5) / ss) * dy - 0.5 * config.fov_y_mm;
      acc += point_time_signal(config, px, py, angle_deg);
    }
  return acc / double(ss * ss);
}

void check_cells(const ScannerConfig& config, int cells_x, int cells_y) {
  if (cells_x < 1 || cells_y < 1 || config.grid.width % cells_x != 0 || config.grid.height % cells_y != 0)
    throw GeometryError("calibration sample of " + std::to_string(cells_x) + "x" + std::to_string(cells_y) +
                        " voxels does not tile a " + std::to_string(config.grid.width) + "x" +
                        std::to_string(config.grid.height) + " grid");
}

SystemMatrix simulate_cells(const ScannerConfig& config, int cells_x, int cells_y) {
  config.validate();
  check_cells(config, cells_x, cells_y);
  const Grid hr = config.grid;
  const Index angles = Index(config.angles_deg.size());
  const RowMajorMatrix<Complex> dft = kept_dft(config);
  const Index per_angle = dft.rows();

  // Column-major scratch so each voxel writes one contiguous column.
  MatrixXcd columns(angles * per_angle, hr.size());
  parallel_for(hr.size(), [&](Index j) {
    const Index x = j % hr.width, y = j / hr.width;
    for (Index a = 0; a < angles; ++a)
      columns.col(j).segment(a * per_angle, per_angle) =
          config.concentration * (dft * voxel_time_signal(config, x, y, config.angles_deg[std::size_t(a)]).cast<Complex>());
  });

  const Grid out_grid{hr.width / cells_x, hr.height / cells_y};
  std::vector<RowInfo> info;
  for (Index a = 0; a < angles; ++a)
    for (int h = config.harmonic_min; h <= config.harmonic_max; ++h)
      for (int b = 0; b < config.bins_per_harmonic; ++b)
        info.push_back({h, config.angles_deg[std::size_t(a)], -1.0, 0.0});

  SystemMatrix sm(out_grid, angles * per_angle);
  sm.rows = std::move(info);
  for (Index y = 0; y < hr.height; ++y)
    for (Index x = 0; x < hr.width; ++x)
      sm.data.col((y / cells_y) * out_grid.width + x / cells_x) += columns.col(y * hr.width + x);
  return sm;
}

}  // namespace

std::vector<double> ScannerConfig::default_angles(int n) {
  std::vector<double> a(std::size_t(std::max(n, 0)));
  for (int i = 0; i < n; ++i) a[std::size_t(i)] = 180.0 * i / n;
  return a;
}

void ScannerConfig::validate() const {
  auto fail = [](const std::string& what) { throw Error("scanner config: " + what); };
  if (grid.width < 2 || grid.height < 2) fail("grid extents must be at least 2");
  if (!(fov_x_mm > 0.0 && fov_y_mm > 0.0)) fail("FOV must be positive");
  if (!(gradient_t_per_m > 0.0)) fail("gradient must be positive");
  if (drive_amplitude_mt && !(*drive_amplitude_mt > 0.0)) fail("drive amplitude must be positive");
  if (!(diameter_nm > 0.0 && saturation_t > 0.0 && temperature_k > 0.0)) fail("particle parameters must be positive");
  if (!(drive_frequency_hz > 0.0 && sampling_rate_hz > 0.0)) fail("frequencies must be positive");
  if (harmonic_min < 1 || harmonic_max < harmonic_min) fail("harmonic range is empty");
  if (angles_deg.empty()) fail("no FFL angles");
  if (periods < 1) fail("periods must be at least 1");
  if (bins_per_harmonic < 1 || bins_per_harmonic > periods) fail("bins per harmonic must lie in [1, periods]");
  if (supersampling < 1) fail("supersampling must be at least 1");
  if (concentration < 0.0) fail("concentration must be non-negative");
  const std::vector<Index> bins = kept_bins(*this);
  if (bins.back() >= samples_per_angle() / 2) fail("kept harmonics exceed the Nyquist limit");
}

double ScannerConfig::drive_amplitude() const {
  return drive_amplitude_mt ? *drive_amplitude_mt : gradient_t_per_m * std::max(fov_x_mm, fov_y_mm) / 2.0;
}

Index ScannerConfig::samples_per_angle() const {
  return std::max<Index>(1, Index(std::llround(periods * sampling_rate_hz / drive_frequency_hz)));
}

Index ScannerConfig::row_count() const {
  return Index(angles_deg.size()) * (harmonic_max - harmonic_min + 1) * bins_per_harmonic;
}

double ScannerConfig::langevin_scale() const {
  const double d = diameter_nm * 1e-9;
  const double moment = saturation_t / kMu0 * std::numbers::pi * d * d * d / 6.0;
  return moment / (kBoltzmann * temperature_k);
}

double langevin(double xi) {
  if (std::abs(xi) < 1e-4) return xi / 3.0 - xi * xi * xi / 45.0;
  return 1.0 / std::tanh(xi) - 1.0 / xi;
}

double langevin_derivative(double xi) {
  const double x2 = xi * xi;
  if (std::abs(xi) < 1e-2) return 1.0 / 3.0 - x2 / 15.0 + 2.0 * x2 * x2 / 189.0 - 7.0 * x2 * x2 * x2 / 4725.0;
  if (std::abs(xi) > 350.0) return 1.0 / x2;
  const double sh = std::sinh(xi);
  return 1.0 / x2 - 1.0 / (sh * sh);
}

VectorXd point_time_signal(const ScannerConfig& config, double x_mm, double y_mm, double angle_deg) {
  const Index n = config.samples_per_angle();
  const double theta = angle_deg * std::numbers::pi / 180.0;
  // Selection field grows along the FFL normal and vanishes on the line.
  const double offset_m = 1e-3 * (-x_mm * std::sin(theta) + y_mm * std::cos(theta));
  const double static_t = config.gradient_t_per_m * offset_m;
  const double amp_t = 1e-3 * config.drive_amplitude_mt.value_or(config.drive_amplitude());
  const double beta = config.langevin_scale();
  VectorXd s(n);
  for (Index k = 0; k < n; ++k) {
    const double phase = 2.0 * std::numbers::pi * config.periods * double(k) / double(n);
    const double xi = beta * (static_t + amp_t * std::cos(phase));
    // -(1/omega) d/dt L(xi(t)) for B_z(t) = static + A cos(omega t).
    s[k] = langevin_derivative(xi) * beta * amp_t * std::sin(phase);
  }
  return s;
}

VectorXcd spectrum(const VectorXd& signal) {
  const Index n = signal.size();
  VectorXcd out(n);
  for (Index b = 0; b < n; ++b) {
    Complex acc(0.0, 0.0);
    for (Index k = 0; k < n; ++k) {
      const double phase = -2.0 * std::numbers::pi * double((b * k) % n) / double(n);
      acc += signal[k] * Complex(std::cos(phase), std::sin(phase));
    }
    out[b] = acc / std::sqrt(double(n));
  }
  return out;
}

std::vector<Index> kept_bins(const ScannerConfig& config) {
  std::vector<Index> bins;
  const int lead = (config.bins_per_harmonic - 1) / 2;
  for (std::size_t a = 0; a < config.angles_deg.size(); ++a)
    for (int h = config.harmonic_min; h <= config.harmonic_max; ++h)
      for (int b = 0; b < config.bins_per_harmonic; ++b) bins.push_back(Index(h) * config.periods + b - lead);
  return bins;
}

SystemMatrix simulate_sm(const ScannerConfig& config, int sample_cells) {
  return simulate_cells(config, sample_cells, sample_cells);
}

SystemMatrix simulate_sm(const ScannerConfig& config, double sample_x_mm, double sample_y_mm) {
  const double cx = sample_x_mm / config.voxel_x_mm(), cy = sample_y_mm / config.voxel_y_mm();
  if (std::abs(cx - std::round(cx)) > 1e-9 || std::abs(cy - std::round(cy)) > 1e-9)
    throw GeometryError("calibration sample size is not a whole number of voxels");
  return simulate_cells(config, int(std::lround(cx)), int(std::lround(cy)));
}

void Phantom::validate() const {
  if (concentration.size() != grid.size()) throw ShapeError("phantom size does not match its grid");
  if ((concentration.array() < 0.0).any()) throw Error("phantom concentration must be non-negative");
  if (!concentration.allFinite()) throw NumericError("phantom contains non-finite values");
}

VectorXcd simulate_measurement(const ScannerConfig& config, const Phantom& phantom) {
  config.validate();
  phantom.validate();
  if (!(phantom.grid == config.grid)) throw ShapeError("phantom grid differs from scanner grid");
  const RowMajorMatrix<Complex> dft = kept_dft(config);
  const Index per_angle = dft.rows(), angles = Index(config.angles_deg.size());
  VectorXcd y(angles * per_angle);
  parallel_for(angles, [&](Index a) {
    VectorXd time = VectorXd::Zero(config.samples_per_angle());
    for (Index j = 0; j < phantom.grid.size(); ++j) {
      const double c = phantom.concentration[j];
      if (c == 0.0) continue;
      time += c * voxel_time_signal(config, j % phantom.grid.width, j / phantom.grid.width,
                                    config.angles_deg[std::size_t(a)]);
    }
    y.segment(a * per_angle, per_angle) = config.concentration * (dft * time.cast<Complex>());
  });
  return y;
}

SimulatedSignal simulate_signal(const SystemMatrix& sm, const Phantom& phantom, const SignalNoise& noise) {
  sm.validate();
  phantom.validate();
  if (!(phantom.grid == sm.grid)) throw ShapeError("phantom grid differs from system-matrix grid");
  SimulatedSignal out{sm.data * phantom.concentration.cast<Complex>(), VectorXd::Zero(sm.row_count())};
  if (noise.sigma) {
    if (noise.sigma->size() != sm.row_count()) throw ShapeError("signal noise: one sigma per row expected");
    out.sigma = *noise.sigma;
  } else if (noise.snr_db) {
    out.sigma = out.y.cwiseAbs() / std::pow(10.0, *noise.snr_db / 20.0);
  }
  if (noise.sigma || noise.snr_db) out.y += complex_noise(sm.row_count(), 1, out.sigma, noise.seed).col(0);
  return out;
}

}  // namespace transms
