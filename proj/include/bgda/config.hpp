#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "bgda/optim.hpp"

namespace bgda {

enum class ExperimentKind { Synthetic, Pinn, ProxSelftest };
enum class OptimizerKind { Bgda, Adaptive, Sbgda, FixedWeightBaseline };
enum class StepsizeSource { Config, Theoretical };

struct ExperimentConfig {
  // [experiment]
  ExperimentKind kind = ExperimentKind::Pinn;
  std::string problem = "poisson1d";
  std::uint64_t seed = 0;

  // [optimizer]
  OptimizerKind optimizer = OptimizerKind::Adaptive;
  OptimizerConfig opt;
  StepsizeSource stepsizes = StepsizeSource::Config;

  // [saddle]
  double lambda = 0.1;
  double radius = 0.0;  // 0: full simplex

  // [pinn]
  std::vector<std::size_t> hidden = {32, 32};
  std::string activation = "tanh";
  std::size_t n_interior = 1024;
  std::size_t n_boundary = 256;
  std::size_t resample_every = 0;  // 0: fixed collocation set
  std::size_t l2re_every = 100;
  std::size_t l2re_grid = 201;  // evaluation grid points per coordinate
  std::size_t chunk = 256;
  std::size_t workers = 1;

  // [synthetic]
  std::size_t dim = 10;
  std::size_t losses = 2;
  double spectrum_lo = 1.0;
  double spectrum_hi = 2.0;
  double heterogeneity = 0.1;
  double noise_sigma = 0.0;

  // [output]
  std::string trace_file = "trace.csv";
  std::string summary_file = "summary.json";

  bool operator==(const ExperimentConfig&) const = default;
};

/// Throws ConfigError (with the offending line) on syntax errors, unknown
/// sections or keys, and invalid values.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string emit_config(const ExperimentConfig& cfg);

/// "section.key=value"; value uses the same syntax as the file format.
void apply_override(ExperimentConfig& cfg, const std::string& assignment);

std::string to_string(ExperimentKind k);
std::string to_string(OptimizerKind k);

}  // namespace bgda
