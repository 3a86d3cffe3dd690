#include "transms/compressed_sensing.hpp"

#include <unsupported/Eigen/FFT>

#include "transms/parallel.hpp"

namespace transms {

namespace {

VectorXcd transform(const VectorXcd& map, Grid g, bool inverse) {
  if (map.size() != g.size()) throw ShapeError("fft2: map size does not match grid");
  Eigen::FFT<double> fft;
  RowMajorMatrix<Complex> m = Eigen::Map<const RowMajorMatrix<Complex>>(map.data(), g.height, g.width);
  VectorXcd line_in, line_out;
  for (Index y = 0; y < g.height; ++y) {
    line_in = m.row(y).transpose();
    inverse ? fft.inv(line_out, line_in) : fft.fwd(line_out, line_in);
    m.row(y) = line_out.transpose();
  }
  for (Index x = 0; x < g.width; ++x) {
    line_in = m.col(x);
    inverse ? fft.inv(line_out, line_in) : fft.fwd(line_out, line_in);
    m.col(x) = line_out;
  }
  // Eigen's inverse already divides by the length; make both unitary.
  const double n = double(g.size());
  const double scale = inverse ? std::sqrt(n) : 1.0 / std::sqrt(n);
  return Eigen::Map<const VectorXcd>(m.data(), m.size()) * scale;
}

VectorXcd soft_threshold(const VectorXcd& v, double t) {
  VectorXcd out(v.size());
  for (Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v[i]);
    out[i] = mag > t ? v[i] * ((mag - t) / mag) : Complex(0.0, 0.0);
  }
  return out;
}

}  // namespace

VectorXcd fft2(const VectorXcd& map, Grid grid) { return transform(map, grid, false); }
VectorXcd ifft2(const VectorXcd& spectrum, Grid grid) { return transform(spectrum, grid, true); }

CsResult cs_recover(const CsProblem& p) {
  if (p.indices.empty()) throw Error("cs_recover: empty mask");
  if (Index(p.indices.size()) != p.measured.size()) throw ShapeError("cs_recover: one value per mask index required");
  if (p.epsilon < 0.0 || !(p.mu > 0.0) || p.iterations < 1 || p.pad < 0) throw Error("cs_recover: invalid settings");
  for (Index i : p.indices)
    if (i < 0 || i >= p.grid.size()) throw Error("cs_recover: mask index out of range");

  const double scale = p.normalize && p.measured.cwiseAbs().maxCoeff() > 0.0 ? p.measured.cwiseAbs().maxCoeff() : 1.0;
  const VectorXcd b = p.measured / scale;
  const double eps = p.epsilon / scale;

  const Grid g{p.grid.width + 2 * p.pad, p.grid.height + 2 * p.pad};
  std::vector<Index> sel(p.indices.size());
  for (std::size_t k = 0; k < sel.size(); ++k) {
    const Index x = p.indices[k] % p.grid.width, y = p.indices[k] / p.grid.width;
    sel[k] = (y + p.pad) * g.width + x + p.pad;
  }
  auto select = [&](const VectorXcd& a) {
    VectorXcd out(Index(sel.size()));
    for (std::size_t k = 0; k < sel.size(); ++k) out[Index(k)] = a[sel[k]];
    return out;
  };
  VectorXd diag = VectorXd::Ones(g.size());
  for (Index s : sel) diag[s] += 1.0;

  VectorXcd a = VectorXcd::Zero(g.size());
  VectorXcd z = VectorXcd::Zero(g.size()), u = z;
  VectorXcd v = project_to_ball<Complex>(VectorXcd::Zero(b.size()), b, eps), w = VectorXcd::Zero(b.size());
  CsResult result;
  result.objective_trace.reserve(std::size_t(p.iterations));
  for (int it = 0; it < p.iterations; ++it) {
    VectorXcd rhs = ifft2(z - u, g);
    for (std::size_t k = 0; k < sel.size(); ++k) rhs[sel[k]] += v[Index(k)] - w[Index(k)];
    a = rhs.cwiseQuotient(diag.cast<Complex>());
    const VectorXcd fa = fft2(a, g);
    const VectorXcd ma = select(a);
    z = soft_threshold(fa + u, 1.0 / p.mu);
    v = project_to_ball<Complex>(ma + w, b, eps);
    u += fa - z;
    w += ma - v;
    result.objective_trace.push_back(fa.cwiseAbs().sum());
    result.primal_residual = std::sqrt((fa - z).squaredNorm() + (ma - v).squaredNorm());
  }
  result.converged = result.primal_residual <= 1e-6 * std::max(1.0, b.norm());
  const std::size_t burn_in = result.objective_trace.size() / 2;
  for (std::size_t k = std::max<std::size_t>(burn_in, 1); k < result.objective_trace.size(); ++k)
    result.objective_increases += result.objective_trace[k] > result.objective_trace[k - 1] * (1.0 + 1e-6);
  // Last iterate onto the measurement ball so the returned row is feasible.
  const VectorXcd consistent = project_to_ball<Complex>(select(a), b, eps);
  for (std::size_t k = 0; k < sel.size(); ++k) a[sel[k]] = consistent[Index(k)];
  result.residual = (select(a) - b).norm() * scale;
  result.row.resize(p.grid.size());
  for (Index y = 0; y < p.grid.height; ++y)
    result.row.segment(y * p.grid.width, p.grid.width) = a.segment((y + p.pad) * g.width + p.pad, p.grid.width) * scale;
  return result;
}

SystemMatrix cs_recover_sm(const MaskedSamples& samples, const CsProblem& settings) {
  samples.mask.validate();
  SystemMatrix out(samples.mask.grid, samples.values.rows());
  out.rows = samples.rows;
  const double root = std::sqrt(double(samples.mask.indices.size()));
  parallel_for(samples.values.rows(), [&](Index i) {
    CsProblem p = settings;
    p.grid = samples.mask.grid;
    p.indices = samples.mask.indices;
    p.measured = samples.values.row(i).transpose();
    const RowInfo& info = samples.rows[std::size_t(i)];
    p.epsilon = info.has_sigma() ? root * info.sigma : 0.0;
    out.data.row(i) = cs_recover(p).row.transpose();
  });
  return out;
}

}  // namespace transms
