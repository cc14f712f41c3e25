#include "bgda/bregman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "bgda/error.hpp"

namespace bgda {
namespace {

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw InvalidInput(std::string(what) + ": dimension mismatch (" + std::to_string(a) + " vs " +
                       std::to_string(b) + ")");
  }
}

void require_finite(std::span<const double> g, const char* what) {
  for (double v : g) {
    if (!std::isfinite(v)) throw NumericError(std::string(what) + ": non-finite gradient entry");
  }
}

// Clip to the interior floor and renormalize; the second clip absorbs the
// O(floor^2) shrink introduced by the division.
std::vector<double> floor_and_normalize(std::vector<double> p) {
  for (double& v : p) v = std::max(v, kWeightFloor);
  const double s = std::accumulate(p.begin(), p.end(), 0.0);
  for (double& v : p) v = std::max(v / s, kWeightFloor);
  return p;
}

double log_sum_exp(std::span<const double> a) {
  const double mx = *std::max_element(a.begin(), a.end());
  double s = 0.0;
  for (double v : a) s += std::exp(v - mx);
  return mx + std::log(s);
}

// Solves y + nu * exp(y) = c for y (log of the coordinate).
double solve_coordinate(double c, double nu) {
  if (nu == 0.0) return c;
  const double log_x = c + std::log(nu);  // log of nu * e^c
  double y;
  if (log_x < 1.0) {
    y = c - std::log1p(std::exp(log_x));
  } else {
    // Lambert-W asymptotic start: w ~ L - ln L with L = ln(nu e^c).
    const double w = log_x - std::log(log_x);
    y = std::log(w) - std::log(nu);
  }
  for (int it = 0; it < 50; ++it) {
    const double e = nu * std::exp(y);
    const double f = y + e - c;
    const double step = f / (1.0 + e);
    y -= step;
    if (std::abs(step) <= 1e-12 * std::max(1.0, std::abs(y))) break;
  }
  return y;
}

struct TauSolution {
  std::vector<double> p;
  double sum_residual;
};

// For a fixed ball multiplier, find the shift tau so the coordinates sum to one.
TauSolution solve_for_shift(std::span<const double> a, double nu) {
  const std::size_t m = a.size();
  const double a_max = *std::max_element(a.begin(), a.end());
  double hi = log_sum_exp(a);  // S(hi) <= 1
  double lo = a_max - nu;      // the largest coordinate alone reaches 1
  if (lo > hi) std::swap(lo, hi);

  std::vector<double> p(m);
  auto eval = [&](double tau, double& deriv) {
    double s = 0.0;
    deriv = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      p[i] = std::exp(solve_coordinate(a[i] - tau, nu));
      s += p[i];
      deriv -= p[i] / (1.0 + nu * p[i]);
    }
    return s;
  };

  double tau = hi;
  double deriv = 0.0;
  double s = eval(tau, deriv);
  for (int it = 0; it < 200 && std::abs(s - 1.0) > 1e-15 * static_cast<double>(m); ++it) {
    if (s > 1.0) {
      lo = tau;
    } else {
      hi = tau;
    }
    double next = tau - (s - 1.0) / deriv;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == tau) break;
    tau = next;
    s = eval(tau, deriv);
  }
  return {p, s - 1.0};
}

}  // namespace

WeightVector::WeightVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw InvalidInput("weight vector must be non-empty");
  double s = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v) || v < -kSimplexTol) throw InvalidInput("weight vector has a negative or non-finite entry");
    s += v;
  }
  if (std::abs(s - 1.0) > kSimplexTol * std::max<double>(1.0, static_cast<double>(values_.size()))) {
    throw InvalidInput("weight vector does not sum to one (sum = " + std::to_string(s) + ")");
  }
}

WeightVector WeightVector::uniform(std::size_t m) {
  if (m == 0) throw InvalidInput("weight vector must be non-empty");
  return WeightVector(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

WeightVector WeightVector::normalized(std::vector<double> values) {
  double s = 0.0;
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput("cannot normalize a negative or non-finite weight");
    s += v;
  }
  if (!(s > 0.0)) throw InvalidInput("cannot normalize an all-zero weight vector");
  for (double& v : values) v /= s;
  return WeightVector(std::move(values));
}

double WeightVector::min() const { return *std::min_element(values_.begin(), values_.end()); }

bool WeightDomain::contains(const WeightVector& p, double tol) const {
  if (p.size() != m) return false;
  double s = 0.0;
  for (double v : p.span()) {
    if (v < -tol) return false;
    s += v;
  }
  if (std::abs(s - 1.0) > tol * std::max<double>(1.0, static_cast<double>(m))) return false;
  if (radius && distance_to_uniform(p.span()) > *radius + tol) return false;
  return true;
}

double generator_value(Generator gen, std::span<const double> p) {
  double s = 0.0;
  switch (gen) {
    case Generator::NegativeEntropy:
      for (double v : p) {
        if (v > 0.0) s += v * std::log(v);
      }
      return s;
    case Generator::SquaredEuclidean:
      for (double v : p) s += v * v;
      return 0.5 * s;
  }
  return s;
}

std::vector<double> generator_gradient(Generator gen, std::span<const double> p) {
  std::vector<double> g(p.size());
  switch (gen) {
    case Generator::NegativeEntropy:
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] < kWeightFloor * (1.0 - 1e-9)) {
          throw DegenerateReference("negative-entropy gradient requested at coordinate " + std::to_string(i) +
                                    " below the interior floor");
        }
        g[i] = std::log(p[i]) + 1.0;
      }
      break;
    case Generator::SquaredEuclidean:
      std::copy(p.begin(), p.end(), g.begin());
      break;
  }
  return g;
}

double divergence(Generator gen, const WeightVector& p, const WeightVector& q) {
  require_same_size(p.size(), q.size(), "divergence");
  double d = 0.0;
  switch (gen) {
    case Generator::NegativeEntropy:
      for (std::size_t i = 0; i < p.size(); ++i) {
        if (q[i] < kWeightFloor * (1.0 - 1e-9)) {
          throw DegenerateReference("divergence reference coordinate " + std::to_string(i) + " below floor");
        }
        if (p[i] > 0.0) d += p[i] * std::log(p[i] / q[i]);
        d += q[i] - p[i];
      }
      break;
    case Generator::SquaredEuclidean:
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double diff = p[i] - q[i];
        d += diff * diff;
      }
      d *= 0.5;
      break;
  }
  return std::max(d, 0.0);
}

double distance_to_uniform(std::span<const double> p) {
  const double u = 1.0 / static_cast<double>(p.size());
  double s = 0.0;
  for (double v : p) s += (v - u) * (v - u);
  return std::sqrt(s);
}

WeightVector prox_simplex_kl(const WeightVector& pi_t, std::span<const double> scaled_grad) {
  require_same_size(pi_t.size(), scaled_grad.size(), "prox_simplex_kl");
  require_finite(scaled_grad, "prox_simplex_kl");
  if (pi_t.min() < kWeightFloor * (1.0 - 1e-9)) {
    throw DegenerateReference("prox_simplex_kl: reference point below the interior floor");
  }
  const std::size_t m = pi_t.size();
  std::vector<double> logits(m);
  for (std::size_t i = 0; i < m; ++i) logits[i] = std::log(pi_t[i]) + scaled_grad[i];
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(m);
  double s = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    p[i] = std::exp(logits[i] - mx);
    s += p[i];
  }
  for (double& v : p) v /= s;
  return WeightVector(floor_and_normalize(std::move(p)));
}

WeightVector prox_restricted(const WeightVector& pi_t, std::span<const double> scaled_grad, double radius) {
  require_same_size(pi_t.size(), scaled_grad.size(), "prox_restricted");
  require_finite(scaled_grad, "prox_restricted");
  if (!(radius > 0.0 && radius < 1.0)) throw InvalidInput("prox_restricted: radius must lie in (0, 1)");
  const std::size_t m = pi_t.size();
  if (distance_to_uniform(pi_t.span()) > radius + 1e-10) {
    throw InvalidInput("prox_restricted: reference point outside the ball");
  }

  WeightVector free = prox_simplex_kl(pi_t, scaled_grad);
  if (distance_to_uniform(free.span()) <= radius) return free;

  const double u = 1.0 / static_cast<double>(m);
  auto solve = [&](double nu) {
    std::vector<double> a(m);
    for (std::size_t i = 0; i < m; ++i) a[i] = scaled_grad[i] + std::log(pi_t[i]) + nu * u;
    return solve_for_shift(a, nu).p;
  };
  auto gap = [&](const std::vector<double>& p) { return distance_to_uniform(p) - radius; };

  double nu_lo = 0.0;
  double nu_hi = 1.0;
  std::vector<double> p_hi = solve(nu_hi);
  int grow = 0;
  while (gap(p_hi) > 0.0) {
    if (++grow > 200) throw SolverFailure("prox_restricted: could not bracket the ball multiplier", gap(p_hi));
    nu_lo = nu_hi;
    nu_hi *= 2.0;
    p_hi = solve(nu_hi);
  }

  for (int it = 0; it < 200; ++it) {
    const double g = gap(p_hi);
    if (g <= 0.0 && g > -1e-12) break;
    const double mid = 0.5 * (nu_lo + nu_hi);
    if (mid <= nu_lo || mid >= nu_hi) break;
    std::vector<double> p_mid = solve(mid);
    if (gap(p_mid) > 0.0) {
      nu_lo = mid;
    } else {
      nu_hi = mid;
      p_hi = std::move(p_mid);
    }
  }

  const double g = gap(p_hi);
  double sum = std::accumulate(p_hi.begin(), p_hi.end(), 0.0);
  if (g > 1e-10 || g < -1e-10 || std::abs(sum - 1.0) > 1e-10) {
    throw SolverFailure("prox_restricted: ball multiplier bisection did not converge", std::max(std::abs(g), std::abs(sum - 1.0)));
  }
  return WeightVector(floor_and_normalize(std::move(p_hi)));
}

WeightVector prox(const WeightDomain& domain, const WeightVector& pi_t, std::span<const double> scaled_grad) {
  if (domain.restricted()) return prox_restricted(pi_t, scaled_grad, *domain.radius);
  return prox_simplex_kl(pi_t, scaled_grad);
}

double three_point_residual(Generator gen, const WeightVector& x, const WeightVector& y, const WeightVector& z) {
  require_same_size(x.size(), y.size(), "three_point_residual");
  require_same_size(x.size(), z.size(), "three_point_residual");
  const auto gy = generator_gradient(gen, y.span());
  const auto gz = generator_gradient(gen, z.span());
  double inner = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) inner += (gz[i] - gy[i]) * (x[i] - z[i]);
  return divergence(gen, x, y) - divergence(gen, x, z) - divergence(gen, z, y) - inner;
}

}  // namespace bgda
