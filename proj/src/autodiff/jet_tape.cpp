#include "bgda/autodiff/jet_tape.hpp"

#include <algorithm>

#include "bgda/error.hpp"

namespace bgda::ad {

void JetTape::record(const Mlp& net, std::span<const double> points, const JetSpec& spec,
                     const simd::KernelTable& kernels) {
  const std::size_t d = net.input_dim();
  if (spec.input_dim != d) throw InvalidInput("jet tape: spec input dimension does not match the network");
  if (points.size() % d != 0 || points.empty()) throw InvalidInput("jet tape: point buffer is not n x d");
  for (auto [j, k] : spec.second) {
    if (j >= d || k >= d) throw InvalidInput("jet tape: second-derivative coordinate out of range");
  }

  net_ = &net;
  version_ = net.version();
  kernels_ = &kernels;
  spec_ = spec;
  n_ = points.size() / d;
  channels_ = spec.channels();
  const std::size_t n = n_;
  const std::size_t cols = channels_ * n;
  const std::size_t layers = net.num_layers();
  const bool has_first = spec.has_first();

  inputs_.assign(layers, {});
  hidden_.assign(layers - 1, {});

  // Input jets: value channel holds x, first-derivative channel j holds e_j.
  auto& a0 = inputs_[0];
  a0.assign(d * cols, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    double* row = a0.data() + i * cols;
    for (std::size_t p = 0; p < n; ++p) row[p] = points[p * d + i];
    if (has_first) std::fill_n(row + spec.first_channel(i) * n, n, 1.0);
  }

  std::vector<double> z;
  for (std::size_t k = 0; k < layers; ++k) {
    const Mlp::LayerView l = net.layer(k);
    const std::vector<double>& a = inputs_[k];
    z.assign(l.out * cols, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      double* zrow = z.data() + o * cols;
      const double* wrow = l.weight + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) {
        if (wrow[i] != 0.0) kernels.axpy(wrow[i], a.data() + i * cols, zrow, cols);
      }
      for (std::size_t p = 0; p < n; ++p) zrow[p] += l.bias[o];
    }

    if (k + 1 == layers) {
      output_ = std::move(z);
      break;
    }

    HiddenCache& cache = hidden_[k];
    cache.s1.resize(l.out * n);
    cache.s2.resize(l.out * n);
    cache.s3.resize(l.out * n);
    std::vector<double>& h = inputs_[k + 1];
    h.assign(l.out * cols, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* zrow = z.data() + o * cols;
      double* hrow = h.data() + o * cols;
      double* s1 = cache.s1.data() + o * n;
      double* s2 = cache.s2.data() + o * n;
      double* s3 = cache.s3.data() + o * n;
      for (std::size_t p = 0; p < n; ++p) {
        const ActivationDerivs ds = activation_derivs(net.activation(), zrow[p]);
        hrow[p] = ds.s;
        s1[p] = ds.s1;
        s2[p] = ds.s2;
        s3[p] = ds.s3;
      }
      if (has_first) {
        for (std::size_t j = 0; j < d; ++j) {
          const std::size_t c = spec.first_channel(j) * n;
          kernels.mul(s1, zrow + c, hrow + c, n);
        }
      }
      for (auto [j, kk] : spec.second) {
        const std::size_t c = spec.second_channel(j, kk) * n;
        kernels.mul(s1, zrow + c, hrow + c, n);
        kernels.mul3_acc(s2, zrow + spec.first_channel(j) * n, zrow + spec.first_channel(kk) * n, hrow + c, n);
      }
    }
    cache.z = std::move(z);
    z = {};
  }
}

void JetTape::backward(const Mlp& net, std::span<const double> cotangent, std::span<double> grad) const {
  if (!recorded()) throw UsageError("jet tape: backward called before record");
  if (&net != net_ || net.version() != version_) throw UsageError("jet tape: network changed since the tape was recorded");
  if (grad.size() != net.num_params()) throw InvalidInput("jet tape: gradient buffer has the wrong length");
  const std::size_t n = n_;
  const std::size_t cols = channels_ * n;
  if (cotangent.size() != net.output_dim() * cols) throw InvalidInput("jet tape: cotangent has the wrong shape");

  const simd::KernelTable& kern = *kernels_;
  const std::size_t layers = net.num_layers();
  const std::size_t d = net.input_dim();

  std::vector<double> zbar(cotangent.begin(), cotangent.end());
  std::vector<double> abar;
  std::vector<double> tmp(n);

  for (std::size_t k = layers; k-- > 0;) {
    const Mlp::LayerView l = net.layer(k);
    const std::vector<double>& a = inputs_[k];
    double* gw = grad.data() + net.layer_offset(k);
    double* gb = gw + l.in * l.out;

    for (std::size_t o = 0; o < l.out; ++o) {
      const double* zb = zbar.data() + o * cols;
      for (std::size_t i = 0; i < l.in; ++i) gw[o * l.in + i] += kern.dot(zb, a.data() + i * cols, cols);
      gb[o] += kern.sum(zb, n);
    }
    if (k == 0) break;

    abar.assign(l.in * cols, 0.0);
    for (std::size_t o = 0; o < l.out; ++o) {
      const double* zb = zbar.data() + o * cols;
      const double* wrow = l.weight + o * l.in;
      for (std::size_t i = 0; i < l.in; ++i) {
        if (wrow[i] != 0.0) kern.axpy(wrow[i], zb, abar.data() + i * cols, cols);
      }
    }

    // Pull the jet cotangents back through the activation of layer k-1.
    const HiddenCache& cache = hidden_[k - 1];
    const std::size_t width = l.in;
    zbar.assign(width * cols, 0.0);
    for (std::size_t o = 0; o < width; ++o) {
      const double* hb = abar.data() + o * cols;
      const double* z = cache.z.data() + o * cols;
      const double* s1 = cache.s1.data() + o * n;
      const double* s2 = cache.s2.data() + o * n;
      const double* s3 = cache.s3.data() + o * n;
      double* zb = zbar.data() + o * cols;

      kern.mul(s1, hb, zb, n);
      if (spec_.has_first()) {
        for (std::size_t j = 0; j < d; ++j) {
          const std::size_t c = spec_.first_channel(j) * n;
          kern.mul3_acc(s2, z + c, hb + c, zb, n);
          kern.mul(s1, hb + c, zb + c, n);
        }
      }
      for (auto [j, kk] : spec_.second) {
        const std::size_t c = spec_.second_channel(j, kk) * n;
        const std::size_t cj = spec_.first_channel(j) * n;
        const std::size_t ck = spec_.first_channel(kk) * n;
        kern.mul(s1, hb + c, zb + c, n);
        kern.mul(z + cj, z + ck, tmp.data(), n);
        kern.mul3_acc(s3, tmp.data(), hb + c, zb, n);
        kern.mul3_acc(s2, z + c, hb + c, zb, n);
        kern.mul3_acc(s2, z + ck, hb + c, zb + cj, n);
        kern.mul3_acc(s2, z + cj, hb + c, zb + ck, n);
      }
    }
  }
}

}  // namespace bgda::ad
