#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "transms/compressed_sensing.hpp"
#include "transms/dataset.hpp"
#include "transms/phantom.hpp"
#include "transms/reconstruction.hpp"
#include "transms/io.hpp"
#include "transms/training.hpp"

namespace transms {

/// Recovery methods understood by the harness.
inline const std::vector<std::string> kMethods{"bicubic", "strided-bicubic", "cs", "transms", "rdsr", "ctsr"};
bool is_network_method(const std::string& method);

struct ReconSettings {
  double alpha_l1 = 0.95;
  double alpha_tv = 0.05;
  double mu = 10.0;
  int max_iterations = 2000;
  double tolerance = 1e-6;
  bool nonnegative = true;

  bool operator==(const ReconSettings&) const = default;
};

struct ExperimentSpec {
  ScannerConfig scanner;  // HR acquisition; gradient and diameter come from the dataset
  DatasetSpec dataset;
  std::vector<int> factors{2};
  std::vector<std::string> methods{"bicubic", "transms"};
  /// Calibration SNR of the HR matrix; LR rows carry sigma_HR / S. Unset is noiseless.
  std::optional<double> snr_db = 30.0;
  TranSmsConfig network = TranSmsConfig::toy();  // factor set per SR factor
  TrainSettings training;
  bool augment_flips = false;
  CsProblem cs;  // grid, indices and measurements are ignored
  bool reconstruct = true;
  ReconSettings recon;
  PhantomSpec phantom;
  /// Writes measured wall-clock times; off gives byte-identical CSVs.
  bool record_runtime = true;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ExperimentRow {
  std::string method;
  int sr_factor = 0;
  std::string dataset_id;
  double nrmse_pct = 0.0;
  double psnr_db = 0.0;  // NaN when reconstruction is off
  double runtime_s = 0.0;
  std::uint64_t seed = 0;
};

struct ExperimentSummary {
  std::string method;
  int sr_factor = 0;
  double mean_nrmse_pct = 0.0;
  double mean_psnr_db = 0.0;
  std::size_t count = 0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;  // one per (method, factor, test SM)
  std::vector<ExperimentSummary> summary;
  /// Trained networks keyed "<method>_x<S>".
  std::map<std::string, TranSmsModel> models;
  std::map<std::string, TrainingRecord> records;
  std::vector<std::string> missing;  // artifacts that could not be produced

  const ExperimentSummary& find(const std::string& method, int factor) const;
};

/// Simulated matrices for one SR factor, ready for every method.
struct PreparedData {
  int factor = 0;
  std::vector<DatasetEntry> entries;
  std::vector<SystemMatrix> hr;  // noise-free references
  std::vector<SystemMatrix> lr;  // noisy orthonormal LR inputs
  std::vector<SystemMatrix> hr_noisy;  // noisy HR measurements (CS, strided)
  std::vector<VectorXd> sigma_hr;  // per-row HR noise std
};

/// Noisy LR input: D A plus noise with sigma_HR / S (large-sample measurement).
SystemMatrix noisy_lr(const SystemMatrix& hr, int factor, std::optional<double> snr_db, std::uint64_t seed);
PreparedData prepare_data(const Dataset& dataset, int factor, std::optional<double> snr_db, std::uint64_t seed);

/// Packed training rows of the given splits (optionally flip-augmented).
RowBatch training_rows(const PreparedData& data, Split split, bool augment);

/// Network for `method` trained on the train split (validation split, if
/// present, selects the checkpoint).
TrainResult train_network(const ExperimentSpec& spec, const PreparedData& data, const std::string& method);

/// Recovered HR matrix of test entry `k` by `method`.
SystemMatrix recover(const ExperimentSpec& spec, const PreparedData& data, std::size_t k, const std::string& method,
                     const TranSmsModel* model);

/// Reconstruction of the phantom with `sm`, whitened by the HR row sigmas.
VectorXd reconstruct_phantom(const ExperimentSpec& spec, const SystemMatrix& sm, const VectorXd& sigma,
                             const VectorXcd& signal);

/// Runs every (method, factor) cell on the test split. When `output_dir` is
/// set, writes results.csv, summary.json, checkpoints, the reference, LR and
/// recovered test matrices (.smx) and error-map PGMs.
/// `pretrained` models (keyed like ExperimentResult::models) skip training.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::optional<std::filesystem::path>& output_dir = {},
                                const std::map<std::string, TranSmsModel>& pretrained = {});

std::string results_csv(const std::vector<ExperimentRow>& rows, bool record_runtime = true);

struct AblationPoint {
  std::size_t size = 0;
  double nrmse_pct = 0.0;
  std::vector<std::string> training_ids;
};

/// Retrains the TranSMS network on seeded random subsets of the training
/// SMs and evaluates on the fixed test split at the first SR factor.
std::vector<AblationPoint> training_set_ablation(const ExperimentSpec& spec, const std::vector<std::size_t>& sizes,
                                                 std::uint64_t seed,
                                                 const std::optional<std::filesystem::path>& output_dir = {});

/// Subset indices for a given size and seed (deterministic).
std::vector<std::size_t> ablation_subset(std::size_t pool, std::size_t size, std::uint64_t seed);

}  // namespace transms
