#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bgda/autodiff/mlp.hpp"
#include "bgda/simd/kernels.hpp"

namespace bgda::ad {

/// Layer-level tape of a batched forward pass that carries input-derivative
/// jets (value, first and selected second derivatives) alongside the values.
///
/// Per layer the tape stores the input activations and, for hidden layers, the
/// activation derivatives needed to pull cotangents of every jet channel back
/// through the network. Activations are laid out as rows of width C*n:
/// channel-major blocks of n points.
class JetTape {
 public:
  JetTape() = default;

  /// points: n x d row-major.
  void record(const Mlp& net, std::span<const double> points, const JetSpec& spec,
              const simd::KernelTable& kernels = simd::kernels());

  bool recorded() const noexcept { return !inputs_.empty(); }
  std::size_t num_points() const noexcept { return n_; }
  const JetSpec& spec() const noexcept { return spec_; }

  /// Output jet entry for output component `out`, channel `c`, point `p`.
  double output(std::size_t out, std::size_t c, std::size_t p) const { return output_[(out * channels_ + c) * n_ + p]; }
  std::span<const double> outputs() const noexcept { return output_; }

  /// Accumulates d<cotangent, outputs>/dtheta into grad. The cotangent uses the
  /// same [out][channel][point] layout as outputs(). Throws UsageError if the
  /// network changed since record().
  void backward(const Mlp& net, std::span<const double> cotangent, std::span<double> grad) const;

 private:
  struct HiddenCache {
    std::vector<double> z;   // pre-activations, out x C*n
    std::vector<double> s1;  // sigma'(z0), out x n
    std::vector<double> s2;
    std::vector<double> s3;
  };

  const Mlp* net_ = nullptr;
  std::uint64_t version_ = 0;
  const simd::KernelTable* kernels_ = nullptr;
  JetSpec spec_;
  std::size_t n_ = 0;
  std::size_t channels_ = 0;
  std::vector<std::vector<double>> inputs_;  // per layer, in x C*n
  std::vector<HiddenCache> hidden_;          // per hidden layer
  std::vector<double> output_;
};

}  // namespace bgda::ad
