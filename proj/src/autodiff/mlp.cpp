#include "bgda/autodiff/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "bgda/autodiff/jet_tape.hpp"

namespace bgda::ad {

ActivationDerivs activation_derivs(Activation act, double z) {
  if (act == Activation::Tanh) {
    const double s = std::tanh(z);
    const double s1 = 1.0 - s * s;
    const double s2 = -2.0 * s * s1;
    const double s3 = s1 * (4.0 * s * s - 2.0 * s1);
    return {s, s1, s2, s3};
  }
  const double s = std::sin(z);
  const double c = std::cos(z);
  return {s, c, -s, -c};
}

Mlp::Mlp(std::vector<std::size_t> widths, Activation act) : widths_(std::move(widths)), act_(act) {
  if (widths_.size() < 2) throw InvalidInput("mlp needs at least an input and an output width");
  for (std::size_t w : widths_) {
    if (w == 0) throw InvalidInput("mlp layer widths must be positive");
  }
  std::size_t total = 0;
  for (std::size_t k = 0; k + 1 < widths_.size(); ++k) {
    offsets_.push_back(total);
    total += (widths_[k] + 1) * widths_[k + 1];
  }
  params_.assign(total, 0.0);
}

Mlp Mlp::glorot(std::vector<std::size_t> widths, Activation act, std::uint64_t seed) {
  Mlp net(std::move(widths), act);
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < net.num_layers(); ++k) {
    const std::size_t in = net.widths_[k];
    const std::size_t out = net.widths_[k + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> dist(-a, a);
    double* w = net.params_.data() + net.offsets_[k];
    for (std::size_t i = 0; i < in * out; ++i) w[i] = dist(rng);
  }
  return net;
}

void Mlp::set_params(std::span<const double> theta) {
  if (theta.size() != params_.size()) {
    throw InvalidInput("mlp: expected " + std::to_string(params_.size()) + " parameters, got " +
                       std::to_string(theta.size()));
  }
  std::copy(theta.begin(), theta.end(), params_.begin());
  ++version_;
}

Mlp::LayerView Mlp::layer(std::size_t k) const {
  const std::size_t in = widths_[k];
  const std::size_t out = widths_[k + 1];
  const double* w = params_.data() + offsets_[k];
  return {in, out, w, w + in * out};
}

std::vector<double> Mlp::forward(std::span<const double> x) const { return forward_as<double>(x); }

std::size_t JetSpec::first_channel(std::size_t j) const {
  if (!has_first() || j >= input_dim) throw InvalidInput("jet spec has no first-derivative channel for this input");
  return 1 + j;
}

std::size_t JetSpec::second_channel(std::size_t j, std::size_t k) const {
  if (j > k) std::swap(j, k);
  for (std::size_t c = 0; c < second.size(); ++c) {
    auto [a, b] = second[c];
    if (a > b) std::swap(a, b);
    if (a == j && b == k) return 1 + input_dim + c;
  }
  throw InvalidInput("jet spec has no channel for the requested second derivative");
}

JetSpec JetSpec::merged(const JetSpec& other) const {
  if (other.input_dim != input_dim) throw InvalidInput("cannot merge jet specs of different input dimension");
  JetSpec out = *this;
  out.first = has_first() || other.has_first();
  for (auto pr : other.second) {
    auto key = pr.first <= pr.second ? pr : std::make_pair(pr.second, pr.first);
    bool present = false;
    for (auto q : out.second) {
      auto qk = q.first <= q.second ? q : std::make_pair(q.second, q.first);
      present = present || qk == key;
    }
    if (!present) out.second.push_back(key);
  }
  return out;
}

std::vector<double> grad_params(const Mlp& net, std::span<const double> x, std::span<const double> upstream) {
  if (upstream.size() != net.output_dim()) throw InvalidInput("grad_params: cotangent dimension mismatch");
  JetTape tape;
  tape.record(net, x, JetSpec::values(net.input_dim()));
  std::vector<double> grad(net.num_params(), 0.0);
  tape.backward(net, upstream, grad);
  return grad;
}

double input_derivative(const Mlp& net, std::span<const double> x, int order, std::pair<std::size_t, std::size_t> coords,
                        std::size_t output) {
  const std::size_t d = net.input_dim();
  if (x.size() != d) throw InvalidInput("input_derivative: input dimension mismatch");
  if (output >= net.output_dim()) throw InvalidInput("input_derivative: output index out of range");
  if (order == 1) {
    if (coords.first >= d) throw InvalidInput("input_derivative: coordinate out of range");
    std::vector<Dual1> in(d);
    for (std::size_t i = 0; i < d; ++i) in[i] = Dual1(x[i], i == coords.first ? 1.0 : 0.0);
    return net.forward_as<Dual1>(in)[output].d;
  }
  if (order == 2) {
    if (coords.first >= d || coords.second >= d) throw InvalidInput("input_derivative: coordinate out of range");
    std::vector<Dual2> in(d);
    for (std::size_t i = 0; i < d; ++i) {
      const double inner = i == coords.first ? 1.0 : 0.0;
      const double outer = i == coords.second ? 1.0 : 0.0;
      in[i] = Dual2(Dual1(x[i], inner), Dual1(outer, 0.0));
    }
    return net.forward_as<Dual2>(in)[output].d.d;
  }
  throw Unsupported("input_derivative: only orders 1 and 2 are supported");
}

double fd_check(const std::function<double(std::span<const double>)>& f, std::span<const double> analytic,
                std::span<const double> x, double h) {
  if (analytic.size() != x.size()) throw InvalidInput("fd_check: gradient and point differ in length");
  std::vector<double> probe(x.begin(), x.end());
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    probe[i] = x[i] + h;
    const double up = f(probe);
    probe[i] = x[i] - h;
    const double down = f(probe);
    probe[i] = x[i];
    const double fd = (up - down) / (2.0 * h);
    worst = std::max(worst, std::abs(analytic[i] - fd) / (std::abs(analytic[i]) + 1e-12));
  }
  return worst;
}

}  // namespace bgda::ad
