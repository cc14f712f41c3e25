#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace bgda {

/// Interior floor applied to every weight coordinate after a prox step.
inline constexpr double kWeightFloor = 1e-12;
/// Tolerance on simplex membership (nonnegativity and unit sum).
inline constexpr double kSimplexTol = 1e-12;

enum class Generator { NegativeEntropy, SquaredEuclidean };

/// A point on the probability simplex. Construction validates membership, so
/// every WeightVector in circulation is nonnegative and sums to one.
class WeightVector {
 public:
  WeightVector() = default;
  explicit WeightVector(std::vector<double> values);

  static WeightVector uniform(std::size_t m);
  /// Renormalizes nonnegative input before validation.
  static WeightVector normalized(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> span() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }
  double min() const;

  friend bool operator==(const WeightVector&, const WeightVector&) = default;

 private:
  std::vector<double> values_;
};

/// The feasible set for the weights: the full simplex, or the simplex
/// intersected with a Euclidean ball around the uniform vector.
struct WeightDomain {
  std::size_t m = 1;
  std::optional<double> radius;

  static WeightDomain full_simplex(std::size_t m) { return {m, std::nullopt}; }
  static WeightDomain ball_restricted(std::size_t m, double r) { return {m, r}; }

  bool restricted() const noexcept { return radius.has_value(); }
  bool contains(const WeightVector& p, double tol = kSimplexTol) const;
};

double generator_value(Generator gen, std::span<const double> p);
std::vector<double> generator_gradient(Generator gen, std::span<const double> p);

/// D(p, q) = psi(p) - psi(q) - <grad psi(q), p - q>.
double divergence(Generator gen, const WeightVector& p, const WeightVector& q);

double distance_to_uniform(std::span<const double> p);

/// Closed-form minimizer of -<g, pi> + KL(pi, pi_t) over the simplex.
WeightVector prox_simplex_kl(const WeightVector& pi_t, std::span<const double> scaled_grad);

/// Same subproblem over simplex ∩ B(U, radius). Falls back to the closed form
/// when the ball is inactive; otherwise bisects on the ball multiplier.
WeightVector prox_restricted(const WeightVector& pi_t, std::span<const double> scaled_grad, double radius);

/// Dispatches to the prox matching the domain.
WeightVector prox(const WeightDomain& domain, const WeightVector& pi_t, std::span<const double> scaled_grad);

/// D(x,y) - D(x,z) - D(z,y) - <grad psi(z) - grad psi(y), x - z>; zero up to rounding.
double three_point_residual(Generator gen, const WeightVector& x, const WeightVector& y, const WeightVector& z);

}  // namespace bgda
