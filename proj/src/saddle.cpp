#include "bgda/saddle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bgda/error.hpp"

namespace bgda {
namespace {

void check_losses(const SaddleProblem& p, const std::vector<LossEval>& losses) {
  if (losses.size() != p.num_losses()) {
    throw InvalidInput("loss oracle returned " + std::to_string(losses.size()) + " terms, expected " +
                       std::to_string(p.num_losses()));
  }
}

void check_weights(const SaddleProblem& p, const WeightVector& pi) {
  if (!p.domain().contains(pi, 1e-10)) throw InvalidInput("weights outside the problem's domain");
}

}  // namespace

SaddleProblem::SaddleProblem(std::vector<LossOracle> losses, double lambda, WeightVector pi_hat, Generator generator,
                             std::optional<WeightDomain> domain)
    : SaddleProblem(
          losses.size(),
          [losses](std::span<const double> theta) {
            std::vector<LossEval> out;
            out.reserve(losses.size());
            for (const auto& f : losses) out.push_back(f(theta));
            return out;
          },
          lambda, std::move(pi_hat), generator, std::move(domain)) {}

SaddleProblem::SaddleProblem(std::size_t num_losses, MultiLossOracle oracle, double lambda, WeightVector pi_hat,
                             Generator generator, std::optional<WeightDomain> domain)
    : m_(num_losses),
      oracle_(std::move(oracle)),
      lambda_(lambda),
      pi_hat_(std::move(pi_hat)),
      generator_(generator),
      domain_(domain.value_or(WeightDomain::full_simplex(num_losses))) {
  if (m_ == 0) throw InvalidInput("saddle problem needs at least one loss");
  if (!(lambda_ >= 0.0) || !std::isfinite(lambda_)) throw InvalidInput("lambda must be a finite nonnegative number");
  if (domain_.m != m_) throw InvalidInput("weight domain dimension does not match the number of losses");
  if (!domain_.contains(pi_hat_)) throw InvalidInput("reference weights pi_hat outside the domain");
}

std::vector<LossEval> SaddleProblem::evaluate(std::span<const double> theta) const {
  auto out = oracle_(theta);
  if (out.size() != m_) throw InvalidInput("loss oracle returned the wrong number of terms");
  return out;
}

SmoothnessInfo SmoothnessInfo::make(double L, double lambda, double L_pi) {
  if (!(lambda > 0.0)) throw InvalidInput("smoothness info needs lambda > 0");
  if (!(L > 0.0)) throw InvalidInput("smoothness info needs L > 0");
  SmoothnessInfo info;
  info.lambda = lambda;
  info.L = std::max(L, lambda);
  info.L_pi = std::max(L_pi > 0.0 ? L_pi : L, lambda);
  return info;
}

double objective(const SaddleProblem& p, const std::vector<LossEval>& losses, const WeightVector& pi) {
  check_losses(p, losses);
  check_weights(p, pi);
  double s = 0.0;
  for (std::size_t i = 0; i < losses.size(); ++i) s += pi[i] * losses[i].value;
  return s - p.lambda() * divergence(p.generator(), pi, p.pi_hat());
}

double objective(const SaddleProblem& p, std::span<const double> theta, const WeightVector& pi) {
  return objective(p, p.evaluate(theta), pi);
}

std::vector<double> grad_theta(const std::vector<LossEval>& losses, const WeightVector& pi) {
  if (losses.size() != pi.size()) throw InvalidInput("grad_theta: weights and losses differ in size");
  std::vector<double> g(losses.front().grad.size(), 0.0);
  for (std::size_t i = 0; i < losses.size(); ++i) {
    if (losses[i].grad.size() != g.size()) throw InvalidInput("grad_theta: loss gradients differ in length");
    for (std::size_t k = 0; k < g.size(); ++k) g[k] += pi[i] * losses[i].grad[k];
  }
  return g;
}

std::vector<double> grad_theta(const SaddleProblem& p, std::span<const double> theta, const WeightVector& pi) {
  check_weights(p, pi);
  return grad_theta(p.evaluate(theta), pi);
}

std::vector<double> grad_pi(const SaddleProblem& p, const std::vector<LossEval>& losses, const WeightVector& pi) {
  check_losses(p, losses);
  check_weights(p, pi);
  std::vector<double> g(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) g[i] = losses[i].value;
  if (p.lambda() == 0.0) return g;
  const auto at_pi = generator_gradient(p.generator(), pi.span());
  const auto at_ref = generator_gradient(p.generator(), p.pi_hat().span());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] -= p.lambda() * (at_pi[i] - at_ref[i]);
  return g;
}

std::vector<double> grad_pi(const SaddleProblem& p, std::span<const double> theta, const WeightVector& pi) {
  return grad_pi(p, p.evaluate(theta), pi);
}

WeightVector best_response(const SaddleProblem& p, const std::vector<LossEval>& losses,
                           const BestResponseOptions& opts) {
  check_losses(p, losses);
  if (!(p.lambda() > 0.0)) throw InvalidInput("best response needs lambda > 0");
  const std::size_t m = losses.size();

  if (p.closed_form_best_response() && !opts.force_numerical) {
    std::vector<double> logits(m);
    for (std::size_t i = 0; i < m; ++i) logits[i] = std::log(p.pi_hat()[i]) + losses[i].value / p.lambda();
    const double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> w(m);
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      w[i] = std::exp(logits[i] - mx);
      s += w[i];
    }
    for (double& v : w) v = std::max(v / s, kWeightFloor);
    return WeightVector::normalized(std::move(w));
  }

  // Prox ascent with step 1/(2 lambda): for the entropic regularizer the log
  // error halves every step, and the objective stays relatively smooth for the
  // Euclidean one.
  const double step = 0.5 / p.lambda();
  WeightVector pi = p.domain().restricted() ? WeightVector::uniform(m) : p.pi_hat();
  if (!p.domain().contains(pi)) pi = WeightVector::uniform(m);
  double change = 0.0;
  for (std::size_t it = 0; it < opts.max_steps; ++it) {
    auto g = grad_pi(p, losses, pi);
    for (double& v : g) v *= step;
    WeightVector next = prox(p.domain(), pi, g);
    change = 0.0;
    for (std::size_t i = 0; i < m; ++i) change = std::max(change, std::abs(std::log(next[i]) - std::log(pi[i])));
    pi = std::move(next);
    if (change <= opts.tolerance * 1e-2) return pi;
  }
  throw SolverFailure("best_response: prox ascent did not reach a fixed point", change);
}

WeightVector best_response(const SaddleProblem& p, std::span<const double> theta, const BestResponseOptions& opts) {
  return best_response(p, p.evaluate(theta), opts);
}

PhiEval phi_and_grad(const SaddleProblem& p, const std::vector<LossEval>& losses, const BestResponseOptions& opts) {
  PhiEval out;
  out.pi_star = best_response(p, losses, opts);
  out.value = objective(p, losses, out.pi_star);
  out.grad = grad_theta(losses, out.pi_star);
  return out;
}

PhiEval phi_and_grad(const SaddleProblem& p, std::span<const double> theta, const BestResponseOptions& opts) {
  return phi_and_grad(p, p.evaluate(theta), opts);
}

}  // namespace bgda
