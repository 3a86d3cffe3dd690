#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "transms/layers.hpp"

namespace transms::testing {

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Tensor t(shape);
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

struct GradCheck {
  double max_rel_error = 0.0;
  Index checked = 0;
};

using Builder = std::function<ad::Var(ad::Tape&, const std::vector<ad::Var>&)>;

/// Compares reverse-mode gradients of sum(w * f(inputs)) with central
/// differences, w a fixed random weighting. `stride` > 1 samples every
/// stride-th element of each input.
inline GradCheck gradient_check(const Builder& build, const std::vector<Tensor>& inputs, double h = 1e-5,
                                Index stride = 1, unsigned seed = 7) {
  Tensor weights;
  auto loss_of = [&](const std::vector<Tensor>& values, std::vector<Tensor>* grads) {
    ad::Tape tape;
    std::vector<ad::Var> leaves;
    for (const Tensor& v : values) leaves.push_back(tape.leaf(v));
    ad::Var out = build(tape, leaves);
    if (weights.size() == 0) {
      std::mt19937_64 rng(seed);
      weights = random_tensor(out.shape(), rng);
    }
    ad::Var loss = ad::weighted_sum(out, weights);
    if (grads) {
      tape.backward(loss);
      for (const ad::Var& l : leaves) grads->push_back(tape.grad(l));
    }
    return loss.value()[0];
  };

  std::vector<Tensor> analytic;
  loss_of(inputs, &analytic);
  GradCheck result;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (Index i = 0; i < inputs[k].size(); i += stride) {
      probe[k][i] = inputs[k][i] + h;
      const double up = loss_of(probe, nullptr);
      probe[k][i] = inputs[k][i] - h;
      const double down = loss_of(probe, nullptr);
      probe[k][i] = inputs[k][i];
      const double fd = (up - down) / (2.0 * h);
      const double rel = std::abs(analytic[k][i] - fd) / (std::abs(fd) + 1e-8);
      result.max_rel_error = std::max(result.max_rel_error, rel);
      ++result.checked;
    }
  return result;
}

}  // namespace transms::testing
