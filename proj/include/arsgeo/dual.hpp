#pragma once

// Forward-mode dual numbers with a fixed number of tangent directions.

#include <array>
#include <cmath>
#include <cstddef>

namespace ars {

template <std::size_t N>
struct Dual {
  double v = 0.0;
  std::array<double, N> d{};

  constexpr Dual() = default;
  constexpr Dual(double value) : v(value) {}  // NOLINT(google-explicit-constructor)

  static constexpr Dual seeded(double value, std::size_t direction) {
    Dual r(value);
    r.d[direction] = 1.0;
    return r;
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

template <std::size_t N> Dual<N> operator+(Dual<N> a, const Dual<N>& b) { return a += b; }
template <std::size_t N> Dual<N> operator-(Dual<N> a, const Dual<N>& b) { return a -= b; }
template <std::size_t N> Dual<N> operator*(Dual<N> a, const Dual<N>& b) { return a *= b; }
template <std::size_t N> Dual<N> operator/(Dual<N> a, const Dual<N>& b) { return a /= b; }
template <std::size_t N> Dual<N> operator+(Dual<N> a, double b) { a.v += b; return a; }
template <std::size_t N> Dual<N> operator+(double b, Dual<N> a) { a.v += b; return a; }
template <std::size_t N> Dual<N> operator-(Dual<N> a, double b) { a.v -= b; return a; }
template <std::size_t N> Dual<N> operator-(double b, const Dual<N>& a) { return Dual<N>(b) - a; }
template <std::size_t N> Dual<N> operator*(Dual<N> a, double b) {
  a.v *= b;
  for (auto& x : a.d) x *= b;
  return a;
}
template <std::size_t N> Dual<N> operator*(double b, Dual<N> a) { return a * b; }
template <std::size_t N> Dual<N> operator/(Dual<N> a, double b) { return a * (1.0 / b); }
template <std::size_t N> Dual<N> operator/(double b, const Dual<N>& a) { return Dual<N>(b) / a; }
template <std::size_t N> Dual<N> operator-(Dual<N> a) {
  a.v = -a.v;
  for (auto& x : a.d) x = -x;
  return a;
}

namespace detail {
template <std::size_t N>
Dual<N> chain(const Dual<N>& a, double value, double slope) {
  Dual<N> r(value);
  for (std::size_t i = 0; i < N; ++i) r.d[i] = slope * a.d[i];
  return r;
}
}  // namespace detail

template <std::size_t N> Dual<N> sin(const Dual<N>& a) { return detail::chain(a, std::sin(a.v), std::cos(a.v)); }
template <std::size_t N> Dual<N> cos(const Dual<N>& a) { return detail::chain(a, std::cos(a.v), -std::sin(a.v)); }
template <std::size_t N> Dual<N> tan(const Dual<N>& a) {
  const double c = std::cos(a.v);
  return detail::chain(a, std::tan(a.v), 1.0 / (c * c));
}
template <std::size_t N> Dual<N> exp(const Dual<N>& a) {
  const double e = std::exp(a.v);
  return detail::chain(a, e, e);
}
template <std::size_t N> Dual<N> log(const Dual<N>& a) { return detail::chain(a, std::log(a.v), 1.0 / a.v); }
template <std::size_t N> Dual<N> sqrt(const Dual<N>& a) {
  const double s = std::sqrt(a.v);
  return detail::chain(a, s, 0.5 / s);
}
template <std::size_t N> Dual<N> abs(const Dual<N>& a) {
  return detail::chain(a, std::abs(a.v), a.v > 0 ? 1.0 : (a.v < 0 ? -1.0 : 0.0));
}
template <std::size_t N> Dual<N> tanh(const Dual<N>& a) {
  const double t = std::tanh(a.v);
  return detail::chain(a, t, 1.0 - t * t);
}
template <std::size_t N> Dual<N> sinh(const Dual<N>& a) { return detail::chain(a, std::sinh(a.v), std::cosh(a.v)); }
template <std::size_t N> Dual<N> cosh(const Dual<N>& a) { return detail::chain(a, std::cosh(a.v), std::sinh(a.v)); }

inline double value_of(double x) { return x; }
template <std::size_t N> double value_of(const Dual<N>& x) { return x.v; }

}  // namespace ars
