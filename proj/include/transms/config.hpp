#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "transms/experiment.hpp"

namespace transms {

using Json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

/// Everything a CLI run needs, loaded from one JSON document.
struct RunConfig {
  int schema_version = kSchemaVersion;
  ExperimentSpec experiment;
};

// Serialisers emit every field. Readers start from the current value of
// `into` (defaults), accept any subset of keys and reject unknown ones with a
// ConfigError naming the dotted key path.
Json to_json(const ScannerConfig& c);
Json to_json(const DatasetSpec& d);
Json to_json(const TranSmsConfig& c);
Json to_json(const TrainSettings& t);
Json to_json(const CsProblem& c);
Json to_json(const ReconSettings& r);
Json to_json(const PhantomSpec& p);
Json to_json(const ExperimentSpec& e);
Json to_json(const RunConfig& r);

void read_json(const nlohmann::json& j, ScannerConfig& into, const std::string& path = "scanner");
void read_json(const nlohmann::json& j, DatasetSpec& into, const std::string& path = "dataset");
void read_json(const nlohmann::json& j, TranSmsConfig& into, const std::string& path = "network");
void read_json(const nlohmann::json& j, TrainSettings& into, const std::string& path = "training");
void read_json(const nlohmann::json& j, CsProblem& into, const std::string& path = "cs");
void read_json(const nlohmann::json& j, ReconSettings& into, const std::string& path = "recon");
void read_json(const nlohmann::json& j, PhantomSpec& into, const std::string& path = "phantom");
void read_json(const nlohmann::json& j, ExperimentSpec& into, const std::string& path = "");
/// Checks schema_version, then reads the experiment keys at the top level.
void read_json(const nlohmann::json& j, RunConfig& into);

TranSmsConfig network_config_from_json(const nlohmann::json& j);

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);
std::string dump_run_config(const RunConfig& config);

}  // namespace transms
