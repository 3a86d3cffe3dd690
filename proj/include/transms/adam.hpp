#pragma once

#include "transms/parameters.hpp"

namespace transms {

struct AdamSettings {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// L2 penalty folded into the gradient (coupled weight decay).
  double weight_decay = 0.0;
};

struct AdamState {
  AdamSettings settings;
  ParameterSet first_moment;
  ParameterSet second_moment;
  long step = 0;

  AdamState() = default;
  AdamState(const ParameterSet& params, AdamSettings settings);
};

/// One bias-corrected Adam update of `params` in place.
void adam_step(ParameterSet& params, const ParameterSet& grads, AdamState& state);

/// Learning rate halved every max(1, total_epochs / 5) epochs.
double halving_schedule(double base_rate, int epoch, int total_epochs);

}  // namespace transms
