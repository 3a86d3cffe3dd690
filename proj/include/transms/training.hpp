#pragma once

#include <functional>
#include <vector>

#include "transms/adam.hpp"
#include "transms/network.hpp"

namespace transms {

/// Rows `rows` of a packed batch (lr, sigma, scale and, if present, hr).
RowBatch slice_rows(const RowBatch& batch, const std::vector<Index>& rows);
/// Stacks batches with identical per-row shapes.
RowBatch concat_batches(const std::vector<RowBatch>& batches);

struct TrainSettings {
  int epochs = 300;
  Index batch_size = 16;
  AdamSettings adam{1e-3, 0.9, 0.999, 1e-8, 1e-8};
  /// Halve the learning rate every epochs / 5 epochs.
  bool halve_schedule = true;
  std::uint64_t seed = 0;
  /// Called after each epoch with (epoch, train loss, validation loss or NaN).
  std::function<void(int, double, double)> on_epoch;
};

struct TrainResult {
  /// Parameters of the best epoch (validation loss, else training loss).
  TranSmsModel model;
  std::vector<double> train_loss;
  std::vector<double> validation_loss;
  int best_epoch = -1;
  bool diverged = false;
};

/// Mean absolute error per element over all rows of `data`, inference mode.
double evaluate_loss(const TranSmsModel& model, const RowBatch& data, Index batch_size = 16);

/// Minibatch Adam on the l1 loss (mean over elements of each minibatch)
/// with DC projection active. The reported epoch loss is the row-weighted
/// mean of the minibatch losses.
TrainResult train(const TranSmsModel& initial, const RowBatch& train_set, const RowBatch* validation,
                  const TrainSettings& settings);

struct TileSettings {
  Index patch = 16;
  Index stride = 8;
};

struct TiledOutput {
  Tensor hr;  // [N, 2, S H, S W]
  Index patches = 0;
  /// Mean over HR pixels covered by more than one patch of the variance of
  /// the overlapping patch predictions.
  double seam_variance = 0.0;
  /// Largest per-patch DC residual minus its bound (<= 0 when consistent).
  double dc_excess = 0.0;
};

/// Tile origins along one axis of length `extent`; the last tile is flush
/// with the far edge.
std::vector<Index> tile_origins(Index extent, Index patch, Index stride);

/// Sliding-window inference on packed LR rows larger than the training
/// grid. Overlapping HR outputs are averaged uniformly.
TiledOutput tiled_inference(const TranSmsModel& model, const Tensor& lr, const VectorXd& sigma,
                            const TileSettings& tiles);

}  // namespace transms
