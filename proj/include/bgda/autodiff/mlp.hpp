#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "bgda/autodiff/dual.hpp"
#include "bgda/error.hpp"

namespace bgda::ad {

enum class Activation { Tanh, Sin };

/// sigma and its first three derivatives at z.
struct ActivationDerivs {
  double s, s1, s2, s3;
};
ActivationDerivs activation_derivs(Activation act, double z);

template <class T>
T activate(Activation act, const T& z) {
  return act == Activation::Tanh ? tanh(z) : sin(z);
}

/// Dense feed-forward network with a linear output layer. Parameters live in a
/// single flat vector: for each layer the weight matrix (row-major, out x in)
/// followed by its bias.
class Mlp {
 public:
  struct LayerView {
    std::size_t in, out;
    const double* weight;
    const double* bias;
  };

  Mlp(std::vector<std::size_t> widths, Activation act);

  /// Glorot-uniform weights, zero biases.
  static Mlp glorot(std::vector<std::size_t> widths, Activation act, std::uint64_t seed);

  std::size_t input_dim() const noexcept { return widths_.front(); }
  std::size_t output_dim() const noexcept { return widths_.back(); }
  std::size_t num_layers() const noexcept { return widths_.size() - 1; }
  std::size_t num_params() const noexcept { return params_.size(); }
  const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  Activation activation() const noexcept { return act_; }

  std::span<const double> params() const noexcept { return params_; }
  void set_params(std::span<const double> theta);
  /// Bumped on every parameter change; tapes use it to detect staleness.
  std::uint64_t version() const noexcept { return version_; }

  LayerView layer(std::size_t k) const;
  std::size_t layer_offset(std::size_t k) const { return offsets_[k]; }

  std::vector<double> forward(std::span<const double> x) const;

  /// Forward pass over any scalar type closed under +, *, and the activation
  /// (double, Dual1, Dual2, ...).
  template <class T>
  std::vector<T> forward_as(std::span<const T> x) const {
    if (x.size() != input_dim()) throw InvalidInput("mlp forward: input dimension mismatch");
    std::vector<T> a(x.begin(), x.end());
    for (std::size_t k = 0; k < num_layers(); ++k) {
      const LayerView l = layer(k);
      std::vector<T> z(l.out);
      for (std::size_t o = 0; o < l.out; ++o) {
        T acc = T(l.bias[o]);
        const double* row = l.weight + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) acc += row[i] * a[i];
        z[o] = (k + 1 < num_layers()) ? activate(act_, acc) : acc;
      }
      a = std::move(z);
    }
    return a;
  }

 private:
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  Activation act_;
  std::vector<double> params_;
  std::uint64_t version_ = 0;
};

/// Which input derivatives a batched pass propagates. Channel 0 is the value,
/// channels 1..d the first derivatives (when requested), then one channel per
/// requested second-derivative pair.
struct JetSpec {
  std::size_t input_dim = 1;
  bool first = false;
  std::vector<std::pair<std::size_t, std::size_t>> second;

  static JetSpec values(std::size_t d) { return {d, false, {}}; }
  static JetSpec gradient(std::size_t d) { return {d, true, {}}; }

  std::size_t channels() const noexcept { return 1 + (has_first() ? input_dim : 0) + second.size(); }
  bool has_first() const noexcept { return first || !second.empty(); }
  std::size_t first_channel(std::size_t j) const;
  std::size_t second_channel(std::size_t j, std::size_t k) const;
  /// Union of two specs over the same input dimension.
  JetSpec merged(const JetSpec& other) const;
};

/// Reverse-mode gradient of <upstream, u(x)> with respect to the parameters.
std::vector<double> grad_params(const Mlp& net, std::span<const double> x, std::span<const double> upstream);

/// du_out/dx_j (order 1, coords.first) or d2u_out/dx_j dx_k (order 2) via
/// nested dual numbers.
double input_derivative(const Mlp& net, std::span<const double> x, int order, std::pair<std::size_t, std::size_t> coords,
                        std::size_t output = 0);

/// max_i |analytic_i - central_difference_i| / (|analytic_i| + 1e-12).
double fd_check(const std::function<double(std::span<const double>)>& f, std::span<const double> analytic,
                std::span<const double> x, double h);

}  // namespace bgda::ad
