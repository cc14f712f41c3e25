#pragma once

// Test-side reference computations, written independently of the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace oracle {

inline double kl(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.0) s += p[i] * std::log(p[i] / q[i]);
  }
  return s;
}

// Minimizes a convex function over {pi in simplex, M in {2,3}} (optionally
// intersected with a ball around uniform): a grid of step `h` over the
// simplex followed by repeated zooming around the best point.
inline std::vector<double> simplex_argmin(std::size_t m, const std::function<double(const std::vector<double>&)>& f,
                                          double radius = -1.0, double h = 1e-3, double final_step = 1e-10) {
  auto feasible_value = [&](const std::vector<double>& p) {
    for (double v : p) {
      if (v < 0.0) return std::numeric_limits<double>::infinity();
    }
    if (radius > 0.0) {
      double d = 0.0;
      for (double v : p) d += (v - 1.0 / static_cast<double>(m)) * (v - 1.0 / static_cast<double>(m));
      if (std::sqrt(d) > radius) return std::numeric_limits<double>::infinity();
    }
    return f(p);
  };
  std::vector<double> best;
  double best_v = std::numeric_limits<double>::infinity();
  auto consider = [&](std::vector<double> p) {
    const double v = feasible_value(p);
    if (v < best_v) {
      best_v = v;
      best = std::move(p);
    }
  };
  const int n = static_cast<int>(std::lround(1.0 / h));
  if (m == 2) {
    for (int i = 0; i <= n; ++i) consider({i * h, 1.0 - i * h});
  } else {
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; i + j <= n; ++j) consider({i * h, j * h, 1.0 - (i + j) * h});
    }
  }
  double step = h;
  while (step > final_step) {
    const std::vector<double> c = best;
    const double s = step / 10.0;
    for (int i = -20; i <= 20; ++i) {
      if (m == 2) {
        consider({c[0] + i * s, c[1] - i * s});
      } else {
        for (int j = -20; j <= 20; ++j) consider({c[0] + i * s, c[1] + j * s, c[2] - (i + j) * s});
      }
    }
    step = s;
  }
  return best;
}

// Central difference of f along direction v.
inline double directional_fd(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                             const std::vector<double>& v, double h) {
  std::vector<double> a = x, b = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    a[i] += h * v[i];
    b[i] -= h * v[i];
  }
  return (f(a) - f(b)) / (2.0 * h);
}

// Richardson-extrapolated central second difference of a scalar function.
inline double second_derivative(const std::function<double(double)>& f, double x, double h) {
  auto d2 = [&](double s) { return (f(x + s) - 2.0 * f(x) + f(x - s)) / (s * s); };
  return (4.0 * d2(h / 2.0) - d2(h)) / 3.0;
}

// Mixed partial d^2 f / dx_j dx_k by a Richardson-extrapolated 4-point stencil.
inline double mixed_partial(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                            std::size_t j, std::size_t k, double h) {
  if (j == k) {
    return second_derivative(
        [&](double t) {
          std::vector<double> y = x;
          y[j] = t;
          return f(y);
        },
        x[j], h);
  }
  auto stencil = [&](double s) {
    auto at = [&](double a, double b) {
      std::vector<double> y = x;
      y[j] += a;
      y[k] += b;
      return f(y);
    };
    return (at(s, s) - at(s, -s) - at(-s, s) + at(-s, -s)) / (4.0 * s * s);
  };
  return (4.0 * stencil(h / 2.0) - stencil(h)) / 3.0;
}

// Straightforward dense tanh/sin network, written without the library's
// flat-parameter helpers: layer k reads W (out x in, row-major) then b.
inline std::vector<double> reference_forward(const std::vector<std::size_t>& widths, const std::vector<double>& params,
                                             std::vector<double> x, bool use_sin = false) {
  std::size_t off = 0;
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    const std::size_t in = widths[k], out = widths[k + 1];
    std::vector<double> z(out, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      double acc = params[off + in * out + o];
      for (std::size_t i = 0; i < in; ++i) acc += params[off + o * in + i] * x[i];
      const bool hidden = k + 2 < widths.size();
      z[o] = hidden ? (use_sin ? std::sin(acc) : std::tanh(acc)) : acc;
    }
    off += (in + 1) * out;
    x = std::move(z);
  }
  return x;
}

inline std::vector<double> random_simplex(std::size_t m, std::mt19937_64& rng, double floor = 1e-6) {
  std::gamma_distribution<double> g(1.0, 1.0);
  std::vector<double> p(m);
  double s = 0.0;
  for (double& v : p) {
    v = g(rng) + floor;
    s += v;
  }
  for (double& v : p) v /= s;
  return p;
}

}  // namespace oracle
