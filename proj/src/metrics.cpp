#include "transms/metrics.hpp"

#include <cmath>

namespace transms {

double psnr(const VectorXd& x, const VectorXd& reference) {
  if (x.size() != reference.size()) throw ShapeError("psnr: lengths differ");
  const double peak = reference.cwiseAbs().maxCoeff();
  if (reference.size() == 0 || peak == 0.0) throw Error("psnr: zero reference");
  const double err = (x - reference).norm();
  if (err == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 20.0 * std::log10(std::sqrt(double(x.size())) * peak / err));
}

}  // namespace transms
