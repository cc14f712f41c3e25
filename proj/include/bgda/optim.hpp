#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bgda/error.hpp"
#include "bgda/saddle.hpp"

namespace bgda {

enum class Schedule { Constant, Linear };

/// Descent+ascent adaptivity. adam+adam adds momentum to the weight step.
enum class AdaptCombo { AdamRmsprop, AdamAdam, RmspropRmsprop };

/// How the adaptive theta step uses the second moment. None takes the
/// bias-corrected momentum as is; Norm divides by sqrt of the smoothed squared
/// gradient norm; Coordinate divides coordinate-wise (textbook Adam).
enum class ThetaScaling { None, Norm, Coordinate };

struct OptimizerConfig {
  double gamma_theta = 0.008;
  double gamma_theta_end = 0.0004;  // used by the linear schedule
  double gamma_pi = 0.1;
  double alpha1 = 0.9;
  double alpha2 = 0.999;
  double beta = 0.999;
  double eps_adapt = 1e-8;
  Schedule schedule = Schedule::Linear;
  AdaptCombo combo = AdaptCombo::AdamRmsprop;
  ThetaScaling theta_scaling = ThetaScaling::None;
  std::size_t batch_size = 1;
  std::size_t iterations = 1000;
  std::uint64_t seed = 0;

  void validate() const;
  double gamma_theta_at(std::size_t t) const;

  bool operator==(const OptimizerConfig&) const = default;
};

struct OptimizerState {
  std::vector<double> theta;
  WeightVector pi;
  std::vector<double> m_theta;
  double v_theta = 0.0;               // smoothed squared gradient norm
  std::vector<double> v_theta_coord;  // coordinate-wise second moment
  std::vector<double> m_pi;
  double v_pi = 0.0;
  std::size_t t = 0;

  static OptimizerState initial(std::vector<double> theta, WeightVector pi);
};

struct TraceRow {
  std::size_t t = 0;
  std::vector<double> losses;
  std::vector<double> pi;
  double grad_theta_norm = 0.0;
  double grad_phi_norm = 0.0;  // NaN when not tracked
  double chi = 0.0;            // NaN when undefined
  double phi = 0.0;
  double bregman = 0.0;  // D(pi*(theta^t), pi^t)
  double l2re = 0.0;
  double stepsize_theta = 0.0;
};

struct RunTrace {
  std::size_t num_losses = 0;
  bool has_phi = false;      // phi, grad_phi_norm and bregman columns
  bool has_l2re = false;
  std::vector<TraceRow> rows;
  OptimizerState final_state;
};

struct RunOptions {
  /// Per loss: 0 for the residual group, 1 for the boundary group. Empty: no chi.
  std::vector<int> loss_groups;
  /// Best-response columns; defaults to on exactly when pi* has a closed form.
  std::optional<bool> track_best_response;
  std::function<double(std::span<const double> theta)> l2re;
  std::size_t l2re_every = 100;
  /// Called after each row is recorded (progress logging).
  std::function<void(const TraceRow&)> on_row;
};

/// Thrown when an iterate or loss turns non-finite; carries the trace so far.
class RunAborted : public NumericError {
 public:
  RunAborted(const std::string& what, RunTrace trace) : NumericError(what), trace_(std::move(trace)) {}
  const RunTrace& trace() const noexcept { return trace_; }

 private:
  RunTrace trace_;
};

/// Every run records T+1 rows: the state before each step and the final state.
RunTrace bgda_run(const SaddleProblem& p, OptimizerState init, const OptimizerConfig& cfg, const RunOptions& opts = {});
RunTrace adaptive_bgda_run(const SaddleProblem& p, OptimizerState init, const OptimizerConfig& cfg,
                           const RunOptions& opts = {});
/// Weights stay at init.pi; theta follows the adaptive descent branch.
RunTrace fixed_weight_run(const SaddleProblem& p, OptimizerState init, const OptimizerConfig& cfg,
                          const RunOptions& opts = {});

/// Per-loss estimates averaged over `batch` i.i.d. draws.
using BatchOracle = std::function<std::vector<LossEval>(std::span<const double> theta, std::size_t batch,
                                                        std::mt19937_64& rng)>;

/// Theta steps use the batch oracle; weight steps use exact loss values.
RunTrace sbgda_run(const SaddleProblem& p, const BatchOracle& batch, OptimizerState init, const OptimizerConfig& cfg,
                   const RunOptions& opts = {});

enum class StepsizeMode { General, Restricted };

struct Stepsizes {
  double gamma_pi = 0.0;
  double gamma_theta = 0.0;
};

Stepsizes theoretical_stepsizes(const SmoothnessInfo& info, StepsizeMode mode = StepsizeMode::General);
/// The looser 1/(184 kappa^4 L) bound on the theta stepsize.
double prose_gamma_theta(const SmoothnessInfo& info);

double linear_decay(double g0, double g_end, std::size_t t, std::size_t T);

std::string to_string(AdaptCombo c);
std::string to_string(ThetaScaling s);
std::string to_string(Schedule s);

}  // namespace bgda
