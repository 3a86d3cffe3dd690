#include "transms/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <random>
#include <set>

namespace transms {

const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

std::vector<double> linspace(double first, double last, int n) {
  if (n < 1) throw Error("linspace: count must be positive");
  std::vector<double> v(std::size_t(n), first);
  for (int i = 1; i < n; ++i) v[std::size_t(i)] = i == n - 1 ? last : first + (last - first) * i / (n - 1);
  return v;
}

DatasetSpec benchmark_dataset_spec(std::uint64_t seed) {
  DatasetSpec s;
  s.gradients_t_per_m = linspace(0.40, 1.00, 10);
  s.diameters_nm = linspace(14.10, 33.40, 10);
  s.validation_gradients_t_per_m = linspace(0.70, 1.03, 3);
  s.validation_diameters_nm = linspace(15.17, 34.47, 10);
  s.reserve_extremes = true;
  s.random_test = 15;
  s.seed = seed;
  return s;
}

std::size_t DatasetManifest::count(Split s) const {
  return std::size_t(std::count_if(entries.begin(), entries.end(), [s](const DatasetEntry& e) { return e.split == s; }));
}

std::vector<DatasetEntry> DatasetManifest::of(Split s) const {
  std::vector<DatasetEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

namespace {

std::string entry_id(double g, double d) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "g%.4f_d%.3f", g, d);
  return buf;
}

}  // namespace

DatasetManifest plan_dataset(const DatasetSpec& spec) {
  if (spec.gradients_t_per_m.empty() || spec.diameters_nm.empty())
    throw ConfigError("dataset: empty parameter grid", "dataset");
  const bool separate_val = !spec.validation_gradients_t_per_m.empty() || !spec.validation_diameters_nm.empty();
  if (separate_val && (spec.validation_gradients_t_per_m.empty() || spec.validation_diameters_nm.empty()))
    throw ConfigError("dataset: validation grid needs both gradients and diameters", "dataset");
  if (separate_val && spec.random_validation > 0)
    throw ConfigError("dataset: give either a validation grid or a random validation count", "dataset");
  if (spec.random_test < 0 || spec.random_validation < 0) throw ConfigError("dataset: negative split count", "dataset");

  DatasetManifest m;
  m.seed = spec.seed;
  const double g_max = *std::max_element(spec.gradients_t_per_m.begin(), spec.gradients_t_per_m.end());
  const double d_max = *std::max_element(spec.diameters_nm.begin(), spec.diameters_nm.end());
  std::set<std::string> ids;
  std::vector<std::size_t> free;
  for (double g : spec.gradients_t_per_m)
    for (double d : spec.diameters_nm) {
      DatasetEntry e{entry_id(g, d), g, d, Split::kTrain};
      if (!ids.insert(e.id).second) throw ConfigError("dataset: duplicate pool entry " + e.id, "dataset");
      if (spec.reserve_extremes && (g == g_max || d == d_max))
        e.split = Split::kTest;
      else
        free.push_back(m.entries.size());
      m.entries.push_back(e);
    }
  if (std::size_t(spec.random_test + spec.random_validation) > free.size())
    throw ConfigError("dataset: requested splits exceed the pool", "dataset");
  std::mt19937_64 rng(spec.seed);
  std::shuffle(free.begin(), free.end(), rng);
  for (int k = 0; k < spec.random_test; ++k) m.entries[free[std::size_t(k)]].split = Split::kTest;
  for (int k = 0; k < spec.random_validation; ++k)
    m.entries[free[std::size_t(spec.random_test + k)]].split = Split::kValidation;

  if (separate_val)
    for (double g : spec.validation_gradients_t_per_m)
      for (double d : spec.validation_diameters_nm) {
        DatasetEntry e{entry_id(g, d), g, d, Split::kValidation};
        if (!ids.insert(e.id).second)
          throw ConfigError("dataset: validation entry " + e.id + " overlaps another split", "dataset");
        m.entries.push_back(e);
      }
  return m;
}

Dataset generate_dataset(const DatasetSpec& spec, const ScannerConfig& base) {
  Dataset ds{plan_dataset(spec), {}};
  for (const DatasetEntry& e : ds.manifest.entries) {
    ScannerConfig c = base;
    c.gradient_t_per_m = e.gradient_t_per_m;
    c.diameter_nm = e.diameter_nm;
    ds.hr.push_back(simulate_sm(c));
  }
  return ds;
}

}  // namespace transms
