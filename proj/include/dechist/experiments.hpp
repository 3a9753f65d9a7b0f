#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

// Batch experiment runner: validates structured configs, dispatches to the
// engines, writes CSV artifacts plus a machine-readable acceptance report.

namespace dechist::experiments {

// Config/schema problems (reported with the offending key path) — the CLI
// maps these to exit code 2, engine failures to exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string kind;
  nlohmann::json params;  // engine-specific block, schema-checked per kind
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string output_dir;

  nlohmann::json to_json() const;  // canonical echo; re-validates
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config_file(const std::string& path);

struct CriterionRow {
  std::string name;
  double measured = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool pass = false;  // |measured - expected| <= tolerance
};

struct AcceptanceReport {
  std::string experiment;
  std::vector<CriterionRow> rows;
  bool pass = false;  // conjunction of rows
  std::string config_hash;
  std::string version;
  std::vector<std::string> artifacts;  // file names inside output_dir
  nlohmann::json to_json() const;
};

// Executes the experiment, writes artifacts into config.output_dir (created
// if missing) and returns the report (also written as report.json).
AcceptanceReport run(const ExperimentConfig& config);

struct CatalogEntry {
  std::string kind;
  std::string description;
  std::string demonstrates;  // the physical statement exercised
  bool stochastic = false;   // requires a seed
  nlohmann::json parameter_schema;
};

const std::vector<CatalogEntry>& catalog();
nlohmann::json catalog_json();
std::string catalog_text();

std::string version_string();

}  // namespace dechist::experiments
