#pragma once

#include <string>
#include <vector>

#include "transms/scanner.hpp"

namespace transms {

enum class Split { kTrain, kValidation, kTest };

const char* split_name(Split s);

/// n values from first to last inclusive.
std::vector<double> linspace(double first, double last, int n);

struct DatasetSpec {
  /// Train/test pool: one SM per (gradient, diameter) pair.
  std::vector<double> gradients_t_per_m;
  std::vector<double> diameters_nm;
  /// Separate validation pool; may be empty.
  std::vector<double> validation_gradients_t_per_m;
  std::vector<double> validation_diameters_nm;
  /// Pool members at the largest gradient or diameter go to the test set.
  bool reserve_extremes = false;
  /// Further test members drawn at random from the rest of the pool.
  int random_test = 0;
  /// Validation members drawn from the pool when no validation pool is given.
  int random_validation = 0;
  std::uint64_t seed = 0;
};

/// Grid used for the simulated benchmark: 10 x 10 train/test pool and a
/// 3 x 10 validation pool, giving a 66/30/34 split.
DatasetSpec benchmark_dataset_spec(std::uint64_t seed = 0);

struct DatasetEntry {
  std::string id;
  double gradient_t_per_m = 0.0;
  double diameter_nm = 0.0;
  Split split = Split::kTrain;

  bool operator==(const DatasetEntry&) const = default;
};

struct DatasetManifest {
  std::vector<DatasetEntry> entries;
  std::uint64_t seed = 0;

  std::size_t count(Split s) const;
  std::vector<DatasetEntry> of(Split s) const;
  bool operator==(const DatasetManifest&) const = default;
};

/// Assigns splits without simulating. Throws if splits would overlap or the
/// requested counts exceed the pool.
DatasetManifest plan_dataset(const DatasetSpec& spec);

struct Dataset {
  DatasetManifest manifest;
  std::vector<SystemMatrix> hr;  // one per manifest entry
};

/// Simulates the HR matrix of every entry with `base` overriding gradient and diameter.
Dataset generate_dataset(const DatasetSpec& spec, const ScannerConfig& base);

}  // namespace transms
