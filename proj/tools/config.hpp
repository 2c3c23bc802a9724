#pragma once

// Run configuration: a JSON document validated against a fixed schema
// (unknown keys are rejected with the offending path), presets, and the
// config hash recorded in the run manifest.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hodgelab/funcalc.hpp"
#include "hodgelab/probes.hpp"

namespace hodgelab::cli {

using nlohmann::json;

inline constexpr int kSchemaVersion = 1;

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config", what) {}
};

/// Either a builtin family or an explicit symbol with constant coefficients.
struct OperatorConfig {
  OperatorSpec builtin;  // used when `explicit_symbol` is empty
  bool is_explicit = false;
  int dim = 1;
  std::vector<Matrix> generators;
  std::optional<Matrix> b1, b2;
  std::string name = "custom";
};

/// [t_min, t_max] with ratio; t_min = t_max = 0 selects the standard window [4h, period/8].
struct TimeWindow {
  double t_min = 0.0;
  double t_max = 0.0;
  double ratio = 0.0;  // 0: 2^{1/4}
};

struct ExperimentConfig {
  std::string type;
  std::string id;
  json own;  // keys given in the experiment entry
};

struct RunConfig {
  std::uint64_t seed = 0;
  int workers = 1;
  std::string preset = "default";
  std::string output = "hodgelab-out";
  bool strict = false;
  OperatorConfig op;
  SolverOptions solver;
  FuncalcOptions funcalc;
  int audit_trials = 32;
  json defaults = json::object();  // the "defaults" section
  std::vector<ExperimentConfig> experiments;
  json document;  // validated input, for the manifest
};

/// Validates and converts; throws ConfigError naming the JSON path.
RunConfig parse_config(const json& doc);
RunConfig load_config(const std::string& path);
/// Parameters of one experiment: preset layer ("paper": M = N = 10 n), then the
/// "defaults" section, then the entry's own keys; "fast" finally divides trial,
/// pair and field counts by 4 (at least 2).
json resolve_params(const RunConfig& cfg, const ExperimentConfig& exp);
void check_preset(const std::string& preset);

/// The published JSON Schema (draft 2020-12) describing accepted documents.
json config_schema();
/// Experiment types and the keys each accepts (besides the common ones).
const std::vector<std::string>& experiment_types();
std::vector<std::string> experiment_keys(const std::string& type);

/// Builds the operator of a run (builtin or explicit).
std::shared_ptr<const PerturbedDirac> build(const OperatorConfig& op, int m_override = 0);
/// Time grid of an experiment for the torus of the run.
TimeGrid make_grid(const TimeWindow& w, const Torus& torus);
TimeWindow parse_window(const json& j);

/// Hex SHA-256 of a string.
std::string sha256_hex(const std::string& text);

}  // namespace hodgelab::cli
