#pragma once

#include <cmath>

namespace bgda::ad {

/// Forward-mode dual number a + b*eps with eps^2 = 0. Nesting Dual<Dual<double>>
/// yields exact second derivatives: seed the inner tangent along one input
/// direction and the outer tangent along another.
template <class T>
struct Dual {
  T v{};
  T d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value), d(0.0) {}  // NOLINT(google-explicit-constructor)
  constexpr Dual(T value, T tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    d = d * o.v + v * o.d;
    v *= o.v;
    return *this;
  }
};

template <class T>
constexpr Dual<T> operator+(const Dual<T>& a, const Dual<T>& b) { return {a.v + b.v, a.d + b.d}; }
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a, const Dual<T>& b) { return {a.v - b.v, a.d - b.d}; }
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a) { return {-a.v, -a.d}; }
template <class T>
constexpr Dual<T> operator*(const Dual<T>& a, const Dual<T>& b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
template <class T>
constexpr Dual<T> operator/(const Dual<T>& a, const Dual<T>& b) {
  return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
}

template <class T>
constexpr Dual<T> operator*(double s, const Dual<T>& a) { return {s * a.v, s * a.d}; }
template <class T>
constexpr Dual<T> operator*(const Dual<T>& a, double s) { return {a.v * s, a.d * s}; }
template <class T>
constexpr Dual<T> operator+(const Dual<T>& a, double s) { return {a.v + s, a.d}; }
template <class T>
constexpr Dual<T> operator+(double s, const Dual<T>& a) { return {s + a.v, a.d}; }
template <class T>
constexpr Dual<T> operator-(const Dual<T>& a, double s) { return {a.v - s, a.d}; }
template <class T>
constexpr Dual<T> operator-(double s, const Dual<T>& a) { return {s - a.v, -a.d}; }

using std::cos;
using std::exp;
using std::sin;
using std::tanh;

template <class T>
Dual<T> sin(const Dual<T>& a) { return {sin(a.v), cos(a.v) * a.d}; }
template <class T>
Dual<T> cos(const Dual<T>& a) { return {cos(a.v), -1.0 * sin(a.v) * a.d}; }
template <class T>
Dual<T> exp(const Dual<T>& a) {
  T e = exp(a.v);
  return {e, e * a.d};
}
template <class T>
Dual<T> tanh(const Dual<T>& a) {
  T t = tanh(a.v);
  return {t, (1.0 - t * t) * a.d};
}

using Dual1 = Dual<double>;
using Dual2 = Dual<Dual<double>>;

inline double value_of(double x) { return x; }
template <class T>
double value_of(const Dual<T>& x) { return value_of(x.v); }

}  // namespace bgda::ad
