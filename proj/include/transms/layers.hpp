#pragma once

#include <vector>

#include "transms/autodiff.hpp"

// Differentiable primitives. Image tensors are [N, C, H, W]; token tensors
// are [N, T, C] with tokens in row-major spatial order.
namespace transms::ad {

Var add(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var sum(const Var& a);
/// sum(x * weights) for a constant weight tensor of the same shape.
Var weighted_sum(const Var& x, const Tensor& weights);
/// sum |a - b|; the subgradient at a tie is 0.
Var l1_distance(const Var& a, const Var& b);

/// Cross-correlation with zero padding. `bias` may be a default Var (none).
/// x [N, Cin, H, W], kernel [Cout, Cin, k, k] with k odd.
Var conv2d(const Var& x, const Var& kernel, const Var& bias, int stride, int pad);
/// Per-channel 3x3-style convolution: kernel [C, 1, k, k].
Var depthwise_conv2d(const Var& x, const Var& kernel, const Var& bias, int stride, int pad);

/// Affine map over the last axis: weight [Cout, Cin], bias [Cout].
Var linear(const Var& x, const Var& weight, const Var& bias);

Var layer_norm(const Var& x, const Var& gain, const Var& shift, double eps = 1e-5);

struct BatchNormStats {
  VectorXd running_mean;
  VectorXd running_var;
};

/// Channel normalisation of [N, C, H, W]. Training mode normalises with the
/// batch statistics and updates `stats` with the given momentum; inference
/// mode uses the running statistics.
Var batch_norm(const Var& x, const Var& gain, const Var& shift, BatchNormStats& stats, bool training,
               double momentum = 0.1, double eps = 1e-5);

Var relu(const Var& x);
Var leaky_relu(const Var& x, double slope = 0.01);
/// Exact (erf) GELU.
Var gelu(const Var& x);
/// Softmax over the last axis.
Var softmax(const Var& x);

/// [N, C*r*r, H, W] -> [N, C, H*r, W*r], out[c, h*r+i, w*r+j] = in[c*r*r + i*r + j, h, w].
Var pixel_shuffle(const Var& x, int r);
Var pixel_unshuffle(const Var& x, int r);

Var concat(const std::vector<Var>& parts, std::size_t axis);
Var reshape(const Var& x, Shape shape);

/// [N, C, H, W] -> [N, H*W, C]
Var to_tokens(const Var& x);
/// [N, H*W, C] -> [N, C, H, W]
Var to_map(const Var& x, Index height, Index width);

/// Multi-head attention core. q, k, v are [N, T, heads*C]; head h owns
/// channels [h*C, (h+1)*C). Returns the concatenated per-head outputs
/// softmax(scale * Q_h K_h^T) V_h as [N, T, heads*C].
Var attention(const Var& q, const Var& k, const Var& v, int heads, double scale);

}  // namespace transms::ad
