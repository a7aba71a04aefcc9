#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmpplab/harness.hpp"
#include "cmpplab/process.hpp"

namespace cmpplab {

inline constexpr int kSchemaVersion = 1;
inline constexpr std::size_t kMinStatisticalPaths = 1000;

/// Suite names accepted in the "suites" array.
const std::vector<std::string>& known_suites();

struct ExperimentConfig {
  ProcessModel model;
  std::vector<double> grid;
  std::size_t n_paths = 0;
  std::uint64_t master_seed = 0;
  double alpha = 0.01;
  std::vector<std::string> suites;

  std::vector<std::pair<double, double>> pairs;  // empty: every s < t on the grid
  Strata strata;
  std::vector<double> wald_times;                // empty: every grid point
  double conditional_wald_t = 0.0;
  std::vector<double> watanabe_times;            // positive grid points
  double watanabe_theta = 0.0;
  double pmf_t = 0.0;
  long long pmf_n_max = 5;

  std::size_t calibration_paths = 10'000;
  std::size_t quantile_bins = 4;
  bool theta_blind = false;
  std::size_t max_events = 10'000'000;

  std::string output_dir = "cmpplab-out";
  bool dump_paths = false;

  bool has_suite(const std::string& name) const;
};

/// Raised when a config document violates its schema or invariants.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> violations);
  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

/// Empty iff the document describes a runnable experiment.
std::vector<std::string> validate_config(const nlohmann::json& doc);

/// Parses and validates; throws ConfigError listing every violation.
ExperimentConfig parse_config(const nlohmann::json& doc);

/// Canonical JSON of the semantic fields (output settings excluded), with
/// defaults filled in. Two configs that run the same experiment have the same
/// canonical form.
nlohmann::json canonical_config(const ExperimentConfig& config);

/// FNV-1a 64 of the canonical form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& config);

MixingLaw mixing_law_from_json(const nlohmann::json& j);
ClaimLaw claim_law_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MixingLaw& law);
nlohmann::json to_json(const ClaimLaw& law);

/// Applies `key=value` overrides. Dotted keys address nested objects; the
/// value is parsed as JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

struct RunOptions {
  unsigned threads = 1;
  std::optional<std::string> output_dir;  // overrides config.output_dir
  bool write = true;
};

struct SuiteOutcome {
  std::string name;
  bool accepted = true;
  std::string json_file;
  std::string csv_file;
};

struct RunManifest {
  std::string config_hash;
  std::uint64_t master_seed = 0;
  std::size_t n_paths = 0;
  std::string process;
  std::vector<SuiteOutcome> suites;
  double wall_clock_seconds = 0.0;
  std::string software_version;
  bool accepted = true;
};

nlohmann::ordered_json to_json(const RunManifest& manifest);

struct RunResult {
  RunManifest manifest;
  /// Report files keyed by path relative to the output directory.
  std::map<std::string, std::string> files;
};

/// Raised when a suite fails operationally; the message names the suite.
class SuiteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Simulates the ensemble once, runs every selected suite on it and, when
/// options.write is set, writes reports/ then manifest.json via temp-file
/// renames. Nothing is written if any step fails.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

// Report serialization.
nlohmann::ordered_json to_json(const MartingaleReport& report);
nlohmann::ordered_json to_json(const StratifiedReport& report);
nlohmann::ordered_json to_json(const WatanabeReport& report);
nlohmann::ordered_json moment_checks_json(const std::string& suite,
                                          const std::vector<MomentCheck>& checks);
std::string to_csv(const MartingaleReport& report);
std::string to_csv(const WatanabeReport& report);
std::string moment_checks_csv(const std::string& suite, const std::vector<MomentCheck>& checks);

/// Built-in demo configurations.
const std::vector<std::string>& demo_names();
/// Throws std::invalid_argument naming the alternatives for an unknown demo.
nlohmann::json demo_config(const std::string& name);

}  // namespace cmpplab
