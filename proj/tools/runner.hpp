#pragma once

// Experiment orchestration for `hodgelab run`: operator construction and
// audits, one CSV and one JSON summary per experiment, and the run manifest.

#include <exception>
#include <string>
#include <vector>

#include "config.hpp"

namespace hodgelab::cli {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes, one per failure kind.
enum ExitCode : int {
  kExitOk = 0,
  kExitUnknown = 1,
  kExitConfig = 2,
  kExitLattice = 3,
  kExitNilpotency = 4,
  kExitCoercivity = 5,
  kExitAccretivity = 6,
  kExitEllipticity = 7,
  kExitDirac = 8,
  kExitResolvent = 9,
  kExitFuncalc = 10,
  kExitTent = 11,
  kExitProbes = 12,
  kExitInvariant = 13,
  kExitIo = 14,
};

/// Exit code for an exception escaping a run.
int exit_code_for(const std::exception& e);
/// Table of (code, meaning) for --help and the README.
std::vector<std::pair<int, std::string>> exit_code_table();

struct ExperimentOutcome {
  std::string id;
  std::string type;
  std::string csv;      // file name inside the output directory
  std::string summary;  // file name inside the output directory
  std::vector<std::string> breaches;
  double seconds = 0.0;
};

struct RunResult {
  std::vector<ExperimentOutcome> experiments;
  std::vector<std::string> breaches;  // all experiments
  int exit_code = kExitOk;            // kExitInvariant when strict and breaches exist
};

/// Runs every experiment of `cfg` and writes <output>/<id>.csv, <output>/<id>.json
/// and <output>/manifest.json. Errors propagate (see exit_code_for).
RunResult run(const RunConfig& cfg);

/// Shortest round-trip decimal representation (locale independent).
std::string format_number(double v);

}  // namespace hodgelab::cli
