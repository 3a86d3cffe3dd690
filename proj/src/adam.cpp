#include "transms/adam.hpp"

#include <cmath>

namespace transms {

AdamState::AdamState(const ParameterSet& params, AdamSettings s)
    : settings(s), first_moment(params.zeros_like()), second_moment(params.zeros_like()) {}

void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state) {
  if (grads.size() != params.size() || state.first_moment.size() != params.size())
    throw ShapeError("adam_step: parameter, gradient and moment sets differ in size");
  const AdamSettings& s = state.settings;
  ++state.step;
  const double correction1 = 1.0 - std::pow(s.beta1, double(state.step));
  const double correction2 = 1.0 - std::pow(s.beta2, double(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params.value(i);
    const Tensor& g = grads[params.name(i)];
    Tensor& m = state.first_moment.value(i);
    Tensor& v = state.second_moment.value(i);
    if (g.shape() != p.shape() || m.shape() != p.shape())
      throw ShapeError("adam_step: shape mismatch for " + params.name(i));
    const VectorXd grad = g.data() + s.weight_decay * p.data();
    m.data() = s.beta1 * m.data() + (1.0 - s.beta1) * grad;
    v.data() = s.beta2 * v.data() + (1.0 - s.beta2) * grad.cwiseAbs2();
    p.data().array() -= s.learning_rate * (m.data().array() / correction1) /
                        ((v.data().array() / correction2).sqrt() + s.epsilon);
  }
}

double halving_schedule(double base_rate, int epoch, int total_epochs) {
  const int period = std::max(1, total_epochs / 5);
  return base_rate * std::pow(0.5, epoch / period);
}

}  // namespace transms
