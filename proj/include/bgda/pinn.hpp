#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bgda/autodiff/dual.hpp"
#include "bgda/autodiff/jet_tape.hpp"
#include "bgda/autodiff/mlp.hpp"
#include "bgda/saddle.hpp"

namespace bgda::pinn {

inline constexpr std::size_t kMaxDim = 3;

struct Box {
  std::vector<double> lo, hi;

  std::size_t dim() const noexcept { return lo.size(); }
  double measure_of_face(std::size_t coord) const;
  static Box unit(std::size_t d) { return {std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)}; }
};

/// The hyperplane x[coord] = lo (side 0) or hi (side 1) of a box.
struct Face {
  std::size_t coord = 0;
  int side = 0;
};

/// Network output and its input derivatives at one point. Only the entries
/// the operator asked for are filled.
struct PointJet {
  std::span<const double> x;
  double u = 0.0;
  std::array<double, kMaxDim> du{};
  std::array<std::array<double, kMaxDim>, kMaxDim> d2u{};
};

/// Partials of a residual with respect to the PointJet entries.
struct PointJetGrad {
  double u = 0.0;
  std::array<double, kMaxDim> du{};
  std::array<std::array<double, kMaxDim>, kMaxDim> d2u{};
};

/// r(jet); when `grad` is non-null the partials are written too.
using ResidualFn = std::function<double(const PointJet& jet, PointJetGrad* grad)>;
using ExactFn = std::function<ad::Dual2(std::span<const ad::Dual2> x)>;

struct Operator {
  std::string name;
  bool interior = true;
  std::vector<Face> faces;  // boundary operators only
  bool first = false;
  std::vector<std::pair<std::size_t, std::size_t>> second;
  ResidualFn residual;
};

struct PdeSpec {
  std::string id;
  Box box;
  std::vector<Operator> operators;
  ExactFn exact;  // may be empty

  std::size_t dim() const noexcept { return box.dim(); }
  std::size_t num_losses() const noexcept { return operators.size(); }
  /// 0 for interior operators, 1 for boundary operators.
  std::vector<int> loss_groups() const;
  /// Jet channels needed by all interior (or all boundary) operators.
  ad::JetSpec interior_jet() const;
  ad::JetSpec boundary_jet(std::size_t op) const;
};

/// Interior points are shared by every interior operator; each boundary
/// operator gets its own points on its faces.
struct CollocationSet {
  std::size_t dim = 0;
  std::vector<double> interior;               // n_r x d
  std::vector<std::vector<double>> boundary;  // per operator, n_b x d (empty for interior operators)
  std::uint64_t seed = 0;

  std::size_t num_interior() const noexcept { return dim ? interior.size() / dim : 0; }
};

/// n_b is the point count per boundary operator. A face that is a single
/// point (1D domains) is visited round-robin; otherwise faces are drawn with
/// probability proportional to their measure.
CollocationSet sample_collocation(const PdeSpec& spec, std::size_t n_r, std::size_t n_b, std::uint64_t seed);

/// Evaluate the exact solution's jet at x for the given channel request.
PointJet exact_jet(const PdeSpec& spec, std::span<const double> x, bool first,
                   const std::vector<std::pair<std::size_t, std::size_t>>& second);

struct EvalOptions {
  std::size_t chunk = 256;
  std::size_t workers = 1;
  const simd::KernelTable* kernels = nullptr;  // null: runtime selection
};

/// Squared-residual losses L_i = (1/N_i) sum r_i(x)^2 and their parameter
/// gradients. Points are processed in fixed chunks and reduced in chunk order,
/// so results do not depend on the worker count.
class PinnLosses {
 public:
  PinnLosses(PdeSpec spec, CollocationSet colloc, std::vector<std::size_t> widths, ad::Activation act,
             EvalOptions opts = {});

  std::size_t num_losses() const noexcept { return spec_.num_losses(); }
  std::size_t num_params() const noexcept { return net_.num_params(); }
  const PdeSpec& spec() const noexcept { return spec_; }
  const CollocationSet& collocation() const noexcept { return colloc_; }
  const ad::Mlp& network() const noexcept { return net_; }

  std::vector<LossEval> evaluate(std::span<const double> theta) const;

  /// Losses over a subset of points: interior indices into the interior set
  /// and, per boundary operator, indices into its point set. Each loss is the
  /// mean over the subset.
  std::vector<LossEval> evaluate_subset(std::span<const double> theta, std::span<const std::size_t> interior_idx,
                                        const std::vector<std::vector<std::size_t>>& boundary_idx) const;

  /// Residuals of every operator at its points (no gradients).
  std::vector<std::vector<double>> residuals(std::span<const double> theta) const;

  MultiLossOracle oracle() const;

 private:
  PdeSpec spec_;
  CollocationSet colloc_;
  ad::Mlp net_;
  EvalOptions opts_;
};

/// Stochastic per-loss gradients from B points drawn uniformly with
/// replacement from each point set. With `deterministic` and B at least the
/// set size, the full set in order is used, reproducing PinnLosses::evaluate.
class PinnBatchOracle {
 public:
  PinnBatchOracle(const PinnLosses& losses, bool deterministic = false) : losses_(&losses), det_(deterministic) {}
  std::vector<LossEval> operator()(std::span<const double> theta, std::size_t batch, std::mt19937_64& rng) const;

 private:
  const PinnLosses* losses_;
  bool det_;
};

/// sqrt(sum (pred - truth)^2 / sum truth^2).
double l2re(std::span<const double> pred, std::span<const double> truth);

/// Regular grid with `per_dim` points per coordinate, box corners included.
std::vector<double> evaluation_grid(const Box& box, std::size_t per_dim);
std::vector<double> exact_values(const PdeSpec& spec, std::span<const double> points);
std::vector<double> predict(const ad::Mlp& net, std::span<const double> points);

/// ||grad_r|| / ||grad_b||.
double conflict_ratio(std::span<const double> grad_r, std::span<const double> grad_b);

struct WindowStat {
  double mean = 0.0;
  double variance = 0.0;  // population variance
  std::size_t count = 0;
};

/// Splits the series into `windows` contiguous groups of near-equal length
/// (window k covers [k*n/w, (k+1)*n/w)). Non-finite values are skipped.
std::vector<WindowStat> window_statistics(std::span<const double> values, std::size_t windows = 3);

/// poisson1d, poisson2d, heat1d, wave1d.
std::vector<PdeSpec> builtin_problems();
PdeSpec builtin_problem(const std::string& id);

}  // namespace bgda::pinn
