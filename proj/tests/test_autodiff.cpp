#include <cmath>
#include <random>

#include "bgda/autodiff/jet_tape.hpp"
#include "bgda/autodiff/mlp.hpp"
#include "bgda/simd/kernels.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace bgda;
using namespace bgda::ad;

namespace {

std::vector<double> params_of(const Mlp& net) { return {net.params().begin(), net.params().end()}; }

}  // namespace

TEST_SUITE("autodiff") {
  TEST_CASE("forward examples") {
    Mlp zero({3, 5, 2}, Activation::Tanh);
    const double x[] = {0.1, -2.0, 4.0};
    for (double v : zero.forward(x)) CHECK(v == 0.0);

    Mlp lin({1, 1}, Activation::Tanh);
    const double w[] = {2.5, 0.0};
    lin.set_params(w);
    const double x1[] = {0.3};
    CHECK(lin.forward(x1)[0] == doctest::Approx(0.75).epsilon(1e-15));

    const Mlp net = Mlp::glorot({1, 4, 1}, Activation::Tanh, 42);
    CHECK(net.forward(x1)[0] == doctest::Approx(oracle::reference_forward(net.widths(), params_of(net), {0.3})[0]).epsilon(1e-15));
    CHECK_THROWS_AS(net.forward(x), InvalidInput);
  }

  TEST_CASE("deterministic initialisation") {
    const Mlp a = Mlp::glorot({2, 8, 8, 1}, Activation::Sin, 7);
    const Mlp b = Mlp::glorot({2, 8, 8, 1}, Activation::Sin, 7);
    CHECK(params_of(a) == params_of(b));
    CHECK(a.num_params() == (2 + 1) * 8 + (8 + 1) * 8 + (8 + 1) * 1);
  }

  TEST_CASE("grad_params") {
    const Mlp net = Mlp::glorot({1, 8, 1}, Activation::Tanh, 3);
    const double x[] = {0.4};
    const double zero[] = {0.0};
    for (double g : grad_params(net, x, zero)) CHECK(g == 0.0);

    // The output layer's weight gradient equals the hidden activations.
    const double one[] = {1.0};
    const std::vector<double> g = grad_params(net, x, one);
    const auto l0 = net.layer(0);
    for (std::size_t o = 0; o < 8; ++o) {
      const double h = std::tanh(l0.weight[o] * x[0] + l0.bias[o]);
      CHECK(g[net.layer_offset(1) + o] == doctest::Approx(h).epsilon(1e-14));
    }
    CHECK(g[net.layer_offset(1) + 8] == 1.0);
  }

  TEST_CASE("grad_params matches finite differences on seeded nets") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      std::mt19937_64 rng(seed);
      std::uniform_int_distribution<std::size_t> width(1, 16), depth(1, 3), dim(1, 3);
      std::vector<std::size_t> widths = {dim(rng)};
      const std::size_t layers = depth(rng);
      for (std::size_t k = 0; k < layers; ++k) widths.push_back(width(rng));
      widths.push_back(1);
      const Activation act = seed % 2 ? Activation::Sin : Activation::Tanh;
      const Mlp net = Mlp::glorot(widths, act, seed);
      std::vector<double> x(widths[0]);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (double& v : x) v = u(rng);
      const double one[] = {1.0};
      const std::vector<double> g = grad_params(net, x, one);
      const auto f = [&](std::span<const double> th) {
        return oracle::reference_forward(widths, {th.begin(), th.end()}, x, act == Activation::Sin)[0];
      };
      // Absolute floor for coordinates whose gradient is tiny.
      const std::vector<double> th = params_of(net);
      double worst = 0.0;
      for (std::size_t i = 0; i < th.size(); ++i) {
        std::vector<double> a = th, b = th;
        a[i] += 1e-6;
        b[i] -= 1e-6;
        const double fd = (f(a) - f(b)) / 2e-6;
        worst = std::max(worst, std::abs(fd - g[i]) / std::max(std::abs(g[i]), 1e-3));
      }
      CHECK(worst < 1e-6);
    }
  }

  TEST_CASE("input derivatives") {
    Mlp lin({2, 1}, Activation::Tanh);
    const double w[] = {1.5, -0.5, 0.2};
    lin.set_params(w);
    const double x[] = {0.3, 0.8};
    CHECK(input_derivative(lin, x, 2, {0, 1}) == 0.0);
    CHECK(input_derivative(lin, x, 2, {1, 1}) == 0.0);
    CHECK(input_derivative(lin, x, 1, {1, 1}) == -0.5);

    Mlp t({1, 1, 1}, Activation::Tanh);
    const double unit[] = {1.0, 0.0, 1.0, 0.0};
    t.set_params(unit);
    const double zero[] = {0.0};
    CHECK(input_derivative(t, zero, 2, {0, 0}) == 0.0);
    const double half[] = {0.5};
    CHECK(input_derivative(t, half, 2, {0, 0}) == doctest::Approx(-0.726862).epsilon(1e-6));
    CHECK(oracle::second_derivative([](double z) { return std::tanh(z); }, 0.5, 1e-3) ==
          doctest::Approx(-0.726862).epsilon(1e-6));
    CHECK_THROWS_AS(input_derivative(t, half, 3, {0, 0}), Unsupported);
  }

  TEST_CASE("second input derivatives match Richardson finite differences") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const std::vector<std::size_t> widths = {2, 6 + seed % 5, 5, 1};
      const Mlp net = Mlp::glorot(widths, seed % 2 ? Activation::Sin : Activation::Tanh, 100 + seed);
      std::mt19937_64 rng(seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      std::vector<double> x = {u(rng), u(rng)};
      const auto f = [&](const std::vector<double>& y) { return net.forward(y)[0]; };
      for (auto [j, k] : {std::pair<std::size_t, std::size_t>{0, 0}, {1, 1}, {0, 1}}) {
        const double ad = input_derivative(net, x, 2, {j, k});
        const double fd = oracle::mixed_partial(f, x, j, k, 1e-3);
        CHECK(std::abs(ad - fd) <= 1e-5 * std::max(std::abs(ad), 1e-2));
      }
      CHECK(std::abs(input_derivative(net, x, 2, {0, 1}) - input_derivative(net, x, 2, {1, 0})) < 1e-10);
    }
  }

  TEST_CASE("jet tape agrees with nested duals and reverse mode") {
    const Mlp net = Mlp::glorot({2, 7, 5, 1}, Activation::Tanh, 9);
    const std::vector<double> pts = {0.3, 0.7, -0.2, 0.5, 0.9, 0.1, 0.0, -0.6};
    const JetSpec spec{2, true, {{0, 0}, {1, 1}, {0, 1}}};
    for (const simd::KernelTable* kt : {&simd::scalar_kernels(), simd::avx2_kernels()}) {
      if (!kt) continue;
      JetTape tape;
      tape.record(net, pts, spec, *kt);
      for (std::size_t p = 0; p < 4; ++p) {
        std::span<const double> x(pts.data() + 2 * p, 2);
        CHECK(tape.output(0, 0, p) == doctest::Approx(net.forward(x)[0]).epsilon(1e-14));
        for (std::size_t j = 0; j < 2; ++j) {
          CHECK(tape.output(0, spec.first_channel(j), p) == doctest::Approx(input_derivative(net, x, 1, {j, j})).epsilon(1e-13));
        }
        for (auto [j, k] : spec.second) {
          CHECK(tape.output(0, spec.second_channel(j, k), p) ==
                doctest::Approx(input_derivative(net, x, 2, {j, k})).epsilon(1e-12));
        }
      }
      // Reverse mode through every jet channel against finite differences.
      std::vector<double> cot(tape.outputs().size());
      for (std::size_t i = 0; i < cot.size(); ++i) cot[i] = std::sin(1.0 + static_cast<double>(i));
      std::vector<double> g(net.num_params(), 0.0);
      tape.backward(net, cot, g);
      const auto F = [&](std::span<const double> th) {
        Mlp n2 = net;
        n2.set_params(th);
        JetTape t;
        t.record(n2, pts, spec, *kt);
        double s = 0.0;
        for (std::size_t i = 0; i < cot.size(); ++i) s += cot[i] * t.outputs()[i];
        return s;
      };
      const std::vector<double> th = params_of(net);
      for (std::size_t i = 0; i < th.size(); ++i) {
        std::vector<double> a = th, b = th;
        a[i] += 1e-5;
        b[i] -= 1e-5;
        CHECK(std::abs((F(a) - F(b)) / 2e-5 - g[i]) < 1e-7 * (1.0 + std::abs(g[i])));
      }
    }
  }

  TEST_CASE("stale tape is rejected") {
    Mlp net = Mlp::glorot({1, 3, 1}, Activation::Tanh, 1);
    const double x[] = {0.2};
    JetTape tape;
    tape.record(net, x, JetSpec::values(1));
    std::vector<double> p = params_of(net);
    p[0] += 0.1;
    net.set_params(p);
    std::vector<double> g(net.num_params(), 0.0);
    const double one[] = {1.0};
    CHECK_THROWS_AS(tape.backward(net, one, g), UsageError);
    JetTape empty;
    CHECK_THROWS_AS(empty.backward(net, one, g), UsageError);
  }

  TEST_CASE("fd_check") {
    const auto quad = [](std::span<const double> x) { return x[0] * x[0] + 3.0 * x[0] * x[1]; };
    const double x[] = {0.7, -1.1};
    const double g[] = {2.0 * 0.7 + 3.0 * -1.1, 3.0 * 0.7};
    CHECK(fd_check(quad, g, x, 1e-5) < 1e-8);
    const double zero[] = {0.0, 0.0};
    CHECK(fd_check([](std::span<const double>) { return 4.0; }, zero, x, 1e-5) == 0.0);
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("scalar and AVX2 variants agree") {
    const simd::KernelTable& s = simd::scalar_kernels();
    const simd::KernelTable* v = simd::avx2_kernels();
    if (!v) {
      MESSAGE("AVX2 not available; only the scalar kernels are exercised");
      v = &s;
    }
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n01;
    for (std::size_t n : {0u, 1u, 3u, 4u, 7u, 8u, 15u, 16u, 17u, 33u, 257u, 1000u}) {
      std::vector<double> a(n), b(n), c(n), y1(n), y2(n);
      for (std::size_t i = 0; i < n; ++i) {
        a[i] = n01(rng);
        b[i] = n01(rng);
        c[i] = n01(rng);
        y1[i] = y2[i] = n01(rng);
      }
      double mag = 1.0;
      for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
      CHECK(std::abs(s.dot(a.data(), b.data(), n) - v->dot(a.data(), b.data(), n)) <= 1e-14 * mag);
      CHECK(std::abs(s.sum(a.data(), n) - v->sum(a.data(), n)) <= 1e-14 * (1.0 + n));
      CHECK(std::abs(s.sum_squares(a.data(), n) - v->sum_squares(a.data(), n)) <= 1e-14 * (1.0 + n));
      s.axpy(0.3, a.data(), y1.data(), n);
      v->axpy(0.3, a.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-15 * (1.0 + std::abs(y1[i])));
      s.mul3_acc(a.data(), b.data(), c.data(), y1.data(), n);
      v->mul3_acc(a.data(), b.data(), c.data(), y2.data(), n);
      s.mul_acc(a.data(), c.data(), y1.data(), n);
      v->mul_acc(a.data(), c.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(y1[i] - y2[i]) <= 1e-14 * (1.0 + std::abs(y1[i])));
      s.mul(a.data(), b.data(), y1.data(), n);
      v->mul(a.data(), b.data(), y2.data(), n);
      for (std::size_t i = 0; i < n; ++i) CHECK(y1[i] == y2[i]);
    }
  }

  TEST_CASE("runtime selection honours BGDA_SIMD") {
    const simd::KernelTable& k = simd::kernels();
    CHECK((k.isa == simd::Isa::Scalar || k.isa == simd::Isa::Avx2));
  }
}
