#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace heraldsim {

/// Forward-mode dual number carrying N partial derivatives.
///
/// Model code is written once as templates over the scalar type; instantiating
/// with Dual<N> yields exact Jacobians for the fitter.
template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT: implicit from constants

  static Dual variable(double value, std::size_t index) {
    Dual x(value);
    x.d[index] = 1.0;
    return x;
  }

  Dual& operator+=(const Dual& o) {
    v += o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] += o.d[i];
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] -= o.d[i];
    return *this;
  }
  Dual& operator*=(const Dual& o) {
    for (std::size_t i = 0; i < N; ++i) d[i] = d[i] * o.v + v * o.d[i];
    v *= o.v;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    const double inv = 1.0 / o.v;
    for (std::size_t i = 0; i < N; ++i) d[i] = (d[i] - v * inv * o.d[i]) * inv;
    v *= inv;
    return *this;
  }
};

template <std::size_t N>
Dual<N> operator-(Dual<N> a) {
  a.v = -a.v;
  for (auto& x : a.d) x = -x;
  return a;
}
template <std::size_t N>
Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <std::size_t N>
Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <std::size_t N>
Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <std::size_t N>
Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }

template <std::size_t N>
Dual<N> operator+(Dual<N> a, double b) { a.v += b; return a; }
template <std::size_t N>
Dual<N> operator+(double a, Dual<N> b) { b.v += a; return b; }
template <std::size_t N>
Dual<N> operator-(Dual<N> a, double b) { a.v -= b; return a; }
template <std::size_t N>
Dual<N> operator-(double a, const Dual<N>& b) { return Dual<N>(a) - b; }
template <std::size_t N>
Dual<N> operator*(Dual<N> a, double b) {
  a.v *= b;
  for (auto& x : a.d) x *= b;
  return a;
}
template <std::size_t N>
Dual<N> operator*(double a, Dual<N> b) { return b * a; }
template <std::size_t N>
Dual<N> operator/(Dual<N> a, double b) { return a * (1.0 / b); }
template <std::size_t N>
Dual<N> operator/(double a, const Dual<N>& b) { return Dual<N>(a) / b; }

namespace detail {
template <std::size_t N>
Dual<N> chain(const Dual<N>& x, double value, double slope) {
  Dual<N> r(value);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = slope * x.d[i];
  return r;
}
}  // namespace detail

template <std::size_t N>
Dual<N> exp(const Dual<N>& x) {
  const double e = std::exp(x.v);
  return detail::chain(x, e, e);
}
template <std::size_t N>
Dual<N> expm1(const Dual<N>& x) {
  return detail::chain(x, std::expm1(x.v), std::exp(x.v));
}
template <std::size_t N>
Dual<N> log(const Dual<N>& x) {
  return detail::chain(x, std::log(x.v), 1.0 / x.v);
}
template <std::size_t N>
Dual<N> log1p(const Dual<N>& x) {
  return detail::chain(x, std::log1p(x.v), 1.0 / (1.0 + x.v));
}
template <std::size_t N>
Dual<N> sqrt(const Dual<N>& x) {
  const double s = std::sqrt(x.v);
  return detail::chain(x, s, 0.5 / s);
}

/// Plain value of a scalar, for branching inside templated model code.
inline double value_of(double x) { return x; }
template <std::size_t N>
double value_of(const Dual<N>& x) { return x.v; }

}  // namespace heraldsim
