#pragma once

// Heat kernel of dx^2 + (dy + x cos(s) dz)^2 + (x sin(s) dz)^2 on R^3 with
// Lebesgue volume, as a one-dimensional integral over the Fourier variable
// dual to z.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <vector>

#include "arsgeo/errors.hpp"
#include "arsgeo/geodesics.hpp"
#include "arsgeo/quadrature.hpp"

namespace ars::heat {

inline constexpr double kPi = std::numbers::pi;

/// Below this |nu t| removable singularities are evaluated by series.
inline constexpr double kSmallNuT = 1e-6;

/// Above this |nu t| the integrand is returned as 0 (sinh would overflow).
inline constexpr double kOverflowNuT = 350.0;

struct QuadConfig {
  double nu_cutoff = 0.0;  // 0: derived from the integrand's envelope
  double abs_tol = 0.0;
  double rel_tol = 1e-12;
  int max_subdivisions = 1 << 14;
};

struct KernelValue {
  double value;
  double error;
};

namespace detail {

/// tanh(nu t) / nu.
inline double tanh_over(double nu, double t) {
  const double u = nu * t;
  if (std::abs(u) < kSmallNuT) return t * (1.0 - u * u / 3.0);
  return std::tanh(u) / nu;
}

/// nu / sinh(2 nu t).
inline double nu_over_sinh2(double nu, double t) {
  const double u = 2 * nu * t;
  if (std::abs(u) < kSmallNuT) return (1.0 - u * u / 6.0) / (2 * t);
  return nu / std::sinh(u);
}

/// nu / tanh(2 nu t).
inline double nu_over_tanh2(double nu, double t) {
  const double u = 2 * nu * t;
  if (std::abs(u) < kSmallNuT) return (1.0 + u * u / 3.0) / (2 * t);
  return nu / std::tanh(u);
}

}  // namespace detail

struct Auxiliaries {
  double F, G;
};

inline Auxiliaries kernel_auxiliaries(double sigma, double nu, double t) {
  if (!(t > 0.0)) throw PreconditionError("diffusion time must be positive");
  const double cs = std::cos(sigma), ss = std::sin(sigma);
  return {-t * ss * ss - detail::tanh_over(nu, t) * cs * cs, -cs * std::tanh(nu * t)};
}

/// Integrand whose integral over nu is the kernel K_t(q, qb).
inline double integrand_I(double sigma, double t, const Vec3& q, const Vec3& qb, double nu) {
  if (!(t > 0.0)) throw PreconditionError("diffusion time must be positive");
  if (std::abs(nu) * t > kOverflowNuT) return 0.0;
  const auto [F, G] = kernel_auxiliaries(sigma, nu, t);
  const double x = q.x(), y = q.y(), z = q.z();
  const double xb = qb.x(), yb = qb.y(), zb = qb.z();
  const double e1 = detail::nu_over_sinh2(nu, t);
  const double e2 = 0.5 * detail::nu_over_tanh2(nu, t);
  const double phase = nu * (z - zb) - (x + xb) * (y - yb) * G / (2 * F);
  const double expo = x * xb * (e1 - G * G / (2 * F)) - (x * x + xb * xb) * (e2 + G * G / (4 * F)) +
                      (y - yb) * (y - yb) / (4 * F);
  const double root_arg = -e1 / (2 * F);
  if (!(root_arg > 0.0)) throw EvalError("negative square-root argument in the kernel integrand");
  return std::cos(phase) * std::exp(expo) * std::sqrt(root_arg) / (4 * kPi * kPi);
}

/// Heisenberg-case integrand.
inline double integrand_heisenberg(double t, const Vec3& q, const Vec3& qb, double nu) {
  if (std::abs(nu) * t > kOverflowNuT) return 0.0;
  const double dx = q.x() - qb.x(), dy = q.y() - qb.y();
  const double phase = nu * ((q.z() - qb.z()) - (q.x() + qb.x()) * (q.y() - qb.y()) / 2);
  // nu/sinh(nu t) = 2 * (nu/2)/sinh(2 (nu/2) t), similarly for tanh
  const double over_sinh = 2 * detail::nu_over_sinh2(nu / 2, t);
  const double over_tanh = 2 * detail::nu_over_tanh2(nu / 2, t);
  return std::cos(phase) * (over_sinh / 2) * std::exp(-(over_tanh / 4) * (dx * dx + dy * dy)) /
         (4 * kPi * kPi);
}

/// Baouendi-Goulaouic-case integrand.
inline double integrand_baouendi_goulaouic(double t, const Vec3& q, const Vec3& qb, double nu) {
  if (std::abs(nu) * t > kOverflowNuT) return 0.0;
  const double x = q.x(), xb = qb.x(), dy = q.y() - qb.y();
  const double e1 = detail::nu_over_sinh2(nu, t);
  const double e2 = detail::nu_over_tanh2(nu, t);
  return std::cos(nu * (q.z() - qb.z())) * std::sqrt(e1 / (2 * t)) *
         std::exp(e1 * x * xb - e2 * (x * x + xb * xb) / 2 - dy * dy / (4 * t)) / (4 * kPi * kPi);
}

namespace detail {

/// Integrates an even integrand over the real line: 2 * int_0^numax.
/// Panels are no wider than pi / (4 omega), omega bounding the phase speed.
inline KernelValue integrate_even(const std::function<double(double)>& f, double t,
                                  double omega, const QuadConfig& cfg) {
  double numax = cfg.nu_cutoff > 0 ? cfg.nu_cutoff : kOverflowNuT / t;
  if (cfg.nu_cutoff <= 0) {
    // envelope scan: stop once the integrand magnitude has fallen 18 orders
    // below the largest magnitude seen so far and stays there
    const double peak0 = std::abs(f(0.0));
    double peak = peak0, nu = 0.25 / t;
    int quiet = 0;
    while (nu < numax) {
      const double v = std::abs(f(nu));
      peak = std::max(peak, v);
      if (v <= 1e-18 * peak && std::abs(f(nu * 1.1)) <= 1e-18 * peak) {
        if (++quiet >= 2) break;
      } else {
        quiet = 0;
      }
      nu *= 1.25;
    }
    numax = std::min(nu, numax);
  }
  std::vector<double> breaks{0.0};
  const double width = omega > 0 ? kPi / (4 * omega) : numax;
  const int pieces = std::max(1, static_cast<int>(std::ceil(numax / width)));
  if (pieces > cfg.max_subdivisions)
    throw ConvergenceError("oscillation too fast for the panel budget", std::abs(pieces));
  // a few extra breaks near 0 where the integrand has most of its mass
  for (double b = numax / 1024; b < numax / pieces; b *= 4) breaks.push_back(b);
  for (int i = 1; i <= pieces; ++i) breaks.push_back(numax * i / pieces);
  std::sort(breaks.begin(), breaks.end());
  QuadOptions qo;
  qo.abs_tol = cfg.abs_tol / 2;
  qo.rel_tol = cfg.rel_tol;
  qo.max_panels = cfg.max_subdivisions;
  const QuadResult r = integrate(f, breaks, qo);
  if (!r.converged) throw ConvergenceError("kernel quadrature tolerance not met", 2 * r.error);
  return {2 * r.value, 2 * r.error};
}

inline double phase_speed(const Vec3& q, const Vec3& qb) {
  return std::abs(q.z() - qb.z()) + std::abs(q.x() + qb.x()) * std::abs(q.y() - qb.y()) / 2;
}

inline void check_query(double sigma, double t) {
  if (!(t > 0.0)) throw PreconditionError("diffusion time must be positive");
  if (!(sigma >= 0.0 && sigma <= kPi / 2 + 1e-15))
    throw PreconditionError("sigma must lie in [0, pi/2]");
}

}  // namespace detail

/// K_t(q, qb) for the nilpotent family with parameter sigma.
inline KernelValue kernel(double sigma, double t, const Vec3& q, const Vec3& qb,
                          const QuadConfig& cfg = {}) {
  detail::check_query(sigma, t);
  return detail::integrate_even([&](double nu) { return integrand_I(sigma, t, q, qb, nu); }, t,
                                detail::phase_speed(q, qb), cfg);
}

inline KernelValue kernel_heisenberg(double t, const Vec3& q, const Vec3& qb,
                                     const QuadConfig& cfg = {}) {
  detail::check_query(0.0, t);
  return detail::integrate_even([&](double nu) { return integrand_heisenberg(t, q, qb, nu); }, t,
                                detail::phase_speed(q, qb), cfg);
}

inline KernelValue kernel_baouendi_goulaouic(double t, const Vec3& q, const Vec3& qb,
                                             const QuadConfig& cfg = {}) {
  detail::check_query(0.0, t);
  return detail::integrate_even(
      [&](double nu) { return integrand_baouendi_goulaouic(t, q, qb, nu); }, t,
      std::abs(q.z() - qb.z()), cfg);
}

/// Kernel of d^2/dg^2 - (mu + cos(s) nu g)^2 - sin(s)^2 nu^2 g^2 type
/// oscillator with a shift, closed form.
inline double q_kernel(double mu, double nu, double sigma, double t, double g, double gb) {
  if (!(nu > 0.0) || !(t > 0.0)) throw PreconditionError("nu and t must be positive");
  const double s2 = std::sin(sigma) * std::sin(sigma);
  const double d = g - gb;
  return std::sqrt(nu / (2 * kPi * std::sinh(2 * nu * t))) *
         std::exp(-(t * mu * mu * s2 + nu * d * d / (2 * std::tanh(2 * nu * t)) +
                    nu * std::tanh(nu * t) * g * gb));
}

/// Normalized Hermite functions phi_0..phi_n at g for frequency nu.
inline std::vector<double> hermite_functions(double nu, double g, int n) {
  std::vector<double> phi(static_cast<std::size_t>(std::max(n, 0)) + 1);
  const double xi = g * std::sqrt(nu);
  phi[0] = std::pow(nu / kPi, 0.25) * std::exp(-nu * g * g / 2);
  if (n >= 1) phi[1] = std::sqrt(2.0) * xi * phi[0];
  for (int k = 1; k < n; ++k)
    phi[k + 1] = std::sqrt(2.0 / (k + 1)) * xi * phi[k] - std::sqrt(double(k) / (k + 1)) * phi[k - 1];
  return phi;
}

/// sum_{n <= N} exp(t E_n) phi_n(g) phi_n(gb), E_n = -2 nu (n + 1/2) - mu^2 sin(s)^2.
inline double mehler_partial_sum(double mu, double nu, double sigma, double t, double g,
                                 double gb, int N) {
  if (N < 0 || !(nu > 0.0)) throw PreconditionError("need N >= 0 and nu > 0");
  const double s2 = std::sin(sigma) * std::sin(sigma);
  const auto a = hermite_functions(nu, g, N);
  const auto b = hermite_functions(nu, gb, N);
  double sum = 0.0;
  for (int n = N; n >= 0; --n)
    sum += std::exp(t * (-2 * nu * (n + 0.5) - mu * mu * s2)) * a[n] * b[n];
  return sum;
}

/// (d_t - Delta) K at q by central differences, divided by |d_t K|.
inline double pde_residual(double sigma, double t, const Vec3& q, const Vec3& qb, double h_space,
                           double h_time, const QuadConfig& cfg = {}) {
  if (!(t > h_time)) throw PreconditionError("need t > h_time");
  auto K = [&](double x, double y, double z, double tt) {
    return kernel(sigma, tt, Vec3(x, y, z), qb, cfg).value;
  };
  const double x = q.x(), y = q.y(), z = q.z(), h = h_space;
  const double k0 = K(x, y, z, t);
  const double kt = (K(x, y, z, t + h_time) - K(x, y, z, t - h_time)) / (2 * h_time);
  const double kxx = (K(x + h, y, z, t) - 2 * k0 + K(x - h, y, z, t)) / (h * h);
  const double kyy = (K(x, y + h, z, t) - 2 * k0 + K(x, y - h, z, t)) / (h * h);
  const double kzz = (K(x, y, z + h, t) - 2 * k0 + K(x, y, z - h, t)) / (h * h);
  const double kyz = (K(x, y + h, z + h, t) - K(x, y + h, z - h, t) - K(x, y - h, z + h, t) +
                      K(x, y - h, z - h, t)) /
                     (4 * h * h);
  const double lap = kxx + kyy + 2 * x * std::cos(sigma) * kyz + x * x * kzz;
  return std::abs(kt - lap) / std::abs(kt);
}

inline double leandre_estimate(double sigma, const Vec3& q, const Vec3& qb, double t,
                               const QuadConfig& cfg = {}) {
  const double k = kernel(sigma, t, q, qb, cfg).value;
  if (!(k > 0.0)) throw EvalError("kernel is not positive; logarithm undefined");
  return -4 * t * std::log(k);
}

struct LeandreTable {
  std::vector<double> times;      // dyadic, decreasing
  std::vector<double> estimates;  // -4 t log K_t
  std::vector<double> first;      // 2 f(t/2) - f(t)
  double extrapolated;            // second Richardson level on the last three times
};

/// Estimates at t0, t0/2, ..., with Richardson extrapolation assuming an
/// expansion in integer powers of t.
inline LeandreTable leandre_table(double sigma, const Vec3& q, const Vec3& qb, double t0,
                                  int levels = 3, const QuadConfig& cfg = {}) {
  if (levels < 3) throw PreconditionError("need at least three time levels");
  LeandreTable tab;
  for (int i = 0; i < levels; ++i) {
    const double t = t0 / std::pow(2.0, i);
    tab.times.push_back(t);
    tab.estimates.push_back(leandre_estimate(sigma, q, qb, t, cfg));
  }
  for (int i = 0; i + 1 < levels; ++i)
    tab.first.push_back(2 * tab.estimates[i + 1] - tab.estimates[i]);
  const std::size_t m = tab.first.size();
  tab.extrapolated = (4 * tab.first[m - 1] - tab.first[m - 2]) / 3;
  return tab;
}

}  // namespace ars::heat
