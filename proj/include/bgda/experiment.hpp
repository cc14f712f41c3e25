#pragma once

#include <string>

#include "bgda/config.hpp"
#include "bgda/optim.hpp"
#include "json.hpp"

namespace bgda {

enum class LogLevel { Quiet, Info, Debug };

/// From BGDA_LOG (quiet, info, debug); info when unset.
LogLevel log_level_from_env();

struct ExperimentResult {
  RunTrace trace;
  nlohmann::json summary;
  std::string trace_path;  // empty when no trace was written
  std::string summary_path;
};

/// Runs one experiment and writes its trace and summary under out_dir. A run
/// that turns non-finite still writes the partial trace before the
/// RunAborted is rethrown.
ExperimentResult run_experiment(const ExperimentConfig& cfg, const std::string& out_dir,
                                LogLevel log = LogLevel::Quiet);

/// Randomised checks of the weight-space primitives; the summary lists each
/// check with its worst observed error.
nlohmann::json prox_selftest(std::uint64_t seed, bool& passed);

}  // namespace bgda
