#pragma once

#include <map>
#include <string>
#include <vector>

#include "transms/dc_projection.hpp"
#include "transms/layers.hpp"
#include "transms/parameters.hpp"

namespace transms {

/// Which branches feed the fusion layer. RDSR zeroes the transformer
/// branch, CTSR zeroes the convolutional branch.
enum class Variant { kFull, kRdsr, kCtsr };

const char* variant_name(Variant v);
Variant parse_variant(const std::string& name);

struct TranSmsConfig {
  int factor = 2;
  int c_1 = 16;
  int c_c = 12;
  int n_rdb = 2;
  int n_cl = 4;
  int n_gr = 6;
  int c_t = 32;
  int n_a = 2;
  int c_cat = 24;
  std::vector<int> strides{1, 1, 2};
  /// Divide attention logits by sqrt(C_T).
  bool scaled_attention = false;
  Variant variant = Variant::kFull;
  bool dc_enabled = true;
  DcMode dc_mode = DcMode::kJoint;

  /// Desk-scale configuration used by the acceptance runs.
  static TranSmsConfig toy(int factor = 2);
  /// Published hyperparameters for S in {2, 4, 8}.
  static TranSmsConfig paper(int factor);

  void validate() const;
  /// Throws ShapeError unless the LR grid is divisible by the stride product.
  void validate_grid(Grid lr) const;
  int stride_product() const;

  bool operator==(const TranSmsConfig&) const = default;
};

struct TranSmsModel {
  TranSmsConfig config;
  ParameterSet params;
  std::map<std::string, ad::BatchNormStats> batch_norm;
};

/// Fan-in uniform weights (bound 1 / sqrt(fan_in)), zero biases, unit gains.
TranSmsModel init_model(const TranSmsConfig& config, std::uint64_t seed);

/// Expected name -> shape table for a configuration.
std::vector<std::pair<std::string, Shape>> parameter_layout(const TranSmsConfig& config);
/// Throws ShapeError naming the first parameter that disagrees with the layout.
void audit_parameters(const TranSmsModel& model);

/// Binds model parameters to tape variables for one forward pass.
class Graph {
 public:
  /// `trainable` records parameters as leaves, otherwise as constants.
  /// `training` selects batch statistics in batch normalisation.
  Graph(ad::Tape& tape, TranSmsModel& model, bool trainable, bool training);

  ad::Tape& tape() const { return tape_; }
  const TranSmsConfig& config() const { return model_.config; }
  bool training() const { return training_; }
  ad::Var param(const std::string& name) const;
  ad::BatchNormStats& stats(const std::string& name) { return model_.batch_norm.at(name); }
  /// Tape variables in parameter order.
  const std::vector<ad::Var>& vars() const { return vars_; }

 private:
  ad::Tape& tape_;
  TranSmsModel& model_;
  bool training_;
  std::vector<ad::Var> vars_;
};

/// Embedding of stage `stage` (0-based): strided 3x3 conv, flatten, LN.
/// Returns tokens [N, T, C_T]; the token grid is written to height/width.
ad::Var token_embedding(Graph& g, const ad::Var& map, int stage, Index& height, Index& width);
/// Convolutional transformer block on embedded tokens: DWSC projections,
/// multi-head attention with residual, MLP with residual. Tokens in and out.
ad::Var transformer_block(Graph& g, const ad::Var& tokens, Index height, Index width, int stage);
/// Whole transformer branch on U_init, restored to the input grid.
ad::Var transformer_branch(Graph& g, const ad::Var& u_init);
/// d-th residual dense block (0-based), C_C channels in and out.
ad::Var rdb_block(Graph& g, const ad::Var& u, int block);
ad::Var conv_branch(Graph& g, const ad::Var& u_init);
/// Z_cat, log2(S) pixel-shuffle upsamplers and Z_fin; returns the pre-DC estimate.
ad::Var fusion_and_upsample(Graph& g, const ad::Var& u_c, const ad::Var& u_t);

/// Full network on normalised LR rows lr [N, 2, H, W] with per-row sigma.
/// Returns the DC-projected estimate [N, 2, S H, S W].
ad::Var forward(Graph& g, const Tensor& lr, const VectorXd& sigma);

/// Rows of a complex LR matrix packed for the network, each scaled to unit peak.
struct RowBatch {
  Tensor lr;       // [N, 2, H, W]
  VectorXd sigma;  // normalised
  VectorXd scale;  // per-row normalisation factor
  Tensor hr;       // [N, 2, S H, S W] normalised target, empty when absent
};

RowBatch pack_rows(const SystemMatrix& lr, const SystemMatrix* hr, const std::vector<Index>& rows);
/// Inverse of the packing for network outputs [N, 2, H, W].
RowMajorMatrix<Complex> unpack_rows(const Tensor& maps, const VectorXd& scale);

/// Inference on packed rows; no normalisation applied.
Tensor predict(const TranSmsModel& model, const Tensor& lr, const VectorXd& sigma);

/// Super-resolves every row of an orthonormal LR matrix. Rows without a
/// sigma use sigma = 0 (exact consistency).
SystemMatrix super_resolve(const TranSmsModel& model, const SystemMatrix& lr, Index batch = 16);

}  // namespace transms
