#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "bgda/bregman.hpp"

namespace bgda {

/// Value and parameter gradient of one loss term at a fixed theta.
struct LossEval {
  double value = 0.0;
  std::vector<double> grad;
};

using LossOracle = std::function<LossEval(std::span<const double> theta)>;
/// Evaluates all M losses in one call; lets PINN losses share a forward pass.
using MultiLossOracle = std::function<std::vector<LossEval>(std::span<const double> theta)>;

/// min over theta, max over pi in S of  sum_i pi_i L_i(theta) - lambda * D(pi || pi_hat).
///
/// Immutable after construction. The oracles must tolerate concurrent calls.
class SaddleProblem {
 public:
  SaddleProblem(std::vector<LossOracle> losses, double lambda, WeightVector pi_hat,
                Generator generator = Generator::NegativeEntropy, std::optional<WeightDomain> domain = std::nullopt);
  SaddleProblem(std::size_t num_losses, MultiLossOracle oracle, double lambda, WeightVector pi_hat,
                Generator generator = Generator::NegativeEntropy, std::optional<WeightDomain> domain = std::nullopt);

  std::size_t num_losses() const noexcept { return m_; }
  double lambda() const noexcept { return lambda_; }
  const WeightVector& pi_hat() const noexcept { return pi_hat_; }
  Generator generator() const noexcept { return generator_; }
  const WeightDomain& domain() const noexcept { return domain_; }

  /// True when pi*(theta) is the softmax closed form (full simplex, negative entropy).
  bool closed_form_best_response() const noexcept {
    return !domain_.restricted() && generator_ == Generator::NegativeEntropy;
  }

  std::vector<LossEval> evaluate(std::span<const double> theta) const;

 private:
  std::size_t m_;
  MultiLossOracle oracle_;
  double lambda_;
  WeightVector pi_hat_;
  Generator generator_;
  WeightDomain domain_;
};

/// Smoothness constants of the objective. kappa >= 1 is enforced by
/// clamping L (and L_pi) to at least lambda.
struct SmoothnessInfo {
  double L = 1.0;
  double L_pi = 1.0;
  double lambda = 1.0;

  static SmoothnessInfo make(double L, double lambda, double L_pi = 0.0);
  double kappa() const noexcept { return L / lambda; }
  double kappa_pi() const noexcept { return L_pi / lambda; }
};

double objective(const SaddleProblem& p, std::span<const double> theta, const WeightVector& pi);
double objective(const SaddleProblem& p, const std::vector<LossEval>& losses, const WeightVector& pi);

std::vector<double> grad_theta(const SaddleProblem& p, std::span<const double> theta, const WeightVector& pi);
std::vector<double> grad_theta(const std::vector<LossEval>& losses, const WeightVector& pi);

/// (L_1, ..., L_M) - lambda * (grad psi(pi) - grad psi(pi_hat)).
std::vector<double> grad_pi(const SaddleProblem& p, std::span<const double> theta, const WeightVector& pi);
std::vector<double> grad_pi(const SaddleProblem& p, const std::vector<LossEval>& losses, const WeightVector& pi);

struct BestResponseOptions {
  double tolerance = 1e-10;
  std::size_t max_steps = 100000;
  bool force_numerical = false;
};

/// Closed-form softmax when available; otherwise prox ascent to a fixed point.
WeightVector best_response(const SaddleProblem& p, std::span<const double> theta, const BestResponseOptions& opts = {});
WeightVector best_response(const SaddleProblem& p, const std::vector<LossEval>& losses,
                           const BestResponseOptions& opts = {});

struct PhiEval {
  double value = 0.0;
  std::vector<double> grad;
  WeightVector pi_star;
};

/// Phi(theta) = L(theta, pi*(theta)) and its Danskin gradient.
PhiEval phi_and_grad(const SaddleProblem& p, std::span<const double> theta, const BestResponseOptions& opts = {});
PhiEval phi_and_grad(const SaddleProblem& p, const std::vector<LossEval>& losses, const BestResponseOptions& opts = {});

}  // namespace bgda
