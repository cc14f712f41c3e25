#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include "bgda/optim.hpp"
#include "bgda/saddle.hpp"

namespace bgda::synthetic {

struct Spectrum {
  double lo = 1.0;
  double hi = 1.0;
};

struct QuadraticOptions {
  /// Size of the per-component perturbations of the shared quadratic.
  double heterogeneity = 0.1;
  /// Radius of the ball around theta0 over which the constants are bounded.
  double region_radius = 10.0;
};

/// M losses L_i(theta) = 1/2 theta^T A_i theta + b_i^T theta + c_i sharing a
/// base matrix with a prescribed spectrum. Negative eigenvalues give
/// nonconvex components.
class QuadraticMinimax {
 public:
  std::size_t dim = 0;
  std::size_t m = 0;
  double lambda = 1.0;
  std::vector<std::vector<double>> A;  // row-major dim x dim
  std::vector<std::vector<double>> b;
  std::vector<double> c;
  std::vector<double> theta0;
  double region_radius = 10.0;
  double weight_floor = 0.0;  // lower bound on pi* over the region (and on pi0)

  LossEval loss(std::size_t i, std::span<const double> theta) const;
  std::vector<LossEval> evaluate(std::span<const double> theta) const;
};

struct QuadraticInstance {
  std::shared_ptr<const QuadraticMinimax> model;
  SaddleProblem problem;
  SmoothnessInfo info;
};

QuadraticInstance make_quadratic(std::uint64_t seed, std::size_t dim, std::size_t m, double lambda, Spectrum spectrum,
                                 QuadraticOptions opts = {});

/// Largest observed ||grad L(z1) - grad L(z2)|| / ||z1 - z2|| over random
/// pairs in the region, with the weight gradient taken modulo constants.
double observed_smoothness(const QuadraticMinimax& q, std::size_t pairs, std::uint64_t seed);

/// Exact per-loss gradients plus sigma * (mean of B standard normal vectors).
class GaussianNoiseOracle {
 public:
  GaussianNoiseOracle(std::shared_ptr<const QuadraticMinimax> model, double sigma)
      : model_(std::move(model)), sigma_(sigma) {}
  std::vector<LossEval> operator()(std::span<const double> theta, std::size_t batch, std::mt19937_64& rng) const;

 private:
  std::shared_ptr<const QuadraticMinimax> model_;
  double sigma_;
};

struct ContractionReport {
  double kappa = 0.0;
  double factor = 0.0;       // 1 - 1/(64 kappa^2)
  double coefficient = 0.0;  // 264 kappa^6
  std::size_t steps = 0;
  std::size_t violations = 0;
  double min_slack = 0.0;
  std::vector<double> slack;  // RHS - LHS per step
};

/// Checks D(pi*(theta^{t+1}), pi^{t+1}) <= factor * D(pi*(theta^t), pi^t)
/// + 264 gamma_t^2 kappa^6 ||grad Phi(theta^t)||^2 along the trace.
ContractionReport verify_contraction(const RunTrace& trace, const SmoothnessInfo& info);

/// (1/T) sum_{t<T} ||grad Phi(theta^t)||^2 with T the number of steps.
double stationarity(const RunTrace& trace);
/// Running means for every prefix length T = 1..steps.
std::vector<double> stationarity_curve(const RunTrace& trace);

struct RestrictedSmoothness {
  double L_pi = 0.0;
  double a_min = 0.0;  // smallest coordinate attainable in the restricted set
  bool clipped = false;
};

/// lambda / a_min for the simplex cut by a ball of radius R around uniform.
RestrictedSmoothness restricted_smoothness(double lambda, std::size_t m, double R);

}  // namespace bgda::synthetic
