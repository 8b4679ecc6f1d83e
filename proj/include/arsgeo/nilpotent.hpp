#pragma once

// Closed-form geometry of the nilpotent type-1 family
// X1 = (1,0,0), X2 = (0,1,x cos s), X3 = (0,0,x sin s), s in [0, pi/2],
// for geodesics leaving the origin with covector (cos theta, sin theta, a).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <vector>

#include <Eigen/Core>

#include "arsgeo/errors.hpp"
#include "arsgeo/geodesics.hpp"
#include "arsgeo/roots.hpp"

namespace ars::nilpotent {

inline constexpr double kPi = std::numbers::pi;

/// Below this |a t| the closed forms switch to their Taylor expansions.
inline constexpr double kSeriesSwitch = 1e-2;

/// cos(sigma) treated as zero below this.
inline constexpr double kFlatCos = 1e-12;

inline bool cos_vanishes(double sigma) { return std::abs(std::cos(sigma)) < kFlatCos; }

inline void check_sigma(double sigma) {
  if (!(sigma >= 0.0 && sigma <= kPi / 2 + 1e-15))
    throw PreconditionError("sigma must lie in [0, pi/2]");
}

/// Endpoint gamma(a, theta, t).
inline Vec3 geodesic_closed_form(double sigma, const CovectorInit& c, double t) {
  const double a = c.a, th = c.theta;
  const double cs = std::cos(sigma), ss = std::sin(sigma);
  const double c2 = cs * cs, s2 = ss * ss;
  const double ct = std::cos(th), st = std::sin(th);
  const double u = a * t;
  if (std::abs(u) < kSeriesSwitch) {
    const double s2t = std::sin(2 * th), st2 = st * st;
    const double u2 = u * u, u3 = u2 * u, u4 = u2 * u2, u5 = u4 * u;
    const double X = ct - st * cs * u / 2 - ct * u2 / 6 + st * cs * u3 / 24 + ct * u4 / 120 -
                     st * cs * u5 / 720;
    const double Y = st + cs * ct * u / 2 - st * c2 * u2 / 6 - cs * ct * u3 / 24 +
                     st * c2 * u4 / 120 + cs * ct * u5 / 720;
    const double Z = s2t * cs / 4 + (s2 * st2 / 6 - st2 / 2 + 1.0 / 3) * u -
                     7 * s2t * cs * u2 / 48 + (-7 * s2 * st2 / 120 + st2 / 8 - 1.0 / 15) * u3 +
                     31 * s2t * cs * u4 / 1440 +
                     (31 * s2 * st2 / 5040 - st2 / 80 + 2.0 / 315) * u5;
    return {t * X, t * Y, t * t * Z};
  }
  const double su = std::sin(u), cu = std::cos(u);
  const double x = (ct * su + (cu - 1) * cs * st) / a;
  const double y = ((su - u) * st * c2 - (cu - 1) * ct * cs + u * st) / a;
  const double z = (4 * std::sin(2 * th) * cs * cu * (1 - cu) +
                    std::cos(2 * th) * (2 * u * s2 - std::sin(2 * u) * (1 + c2) + 4 * su * c2) +
                    2 * u * (1 + c2) - std::sin(2 * u) * s2 - 4 * su * c2) /
                   (8 * a * a);
  return {x, y, z};
}

/// Coefficients of the Jacobian as a trigonometric polynomial in 2 theta,
/// as functions of u = a t: Jac = (A cos 2theta + B + C sin 2theta) / (2 a^4).
struct JacobianCoeffs {
  double A, B, C;
};

namespace detail {

/// w cos w - sin w without the cancellation near 0.
inline double wcos_minus_sin(double w) {
  if (std::abs(w) >= 0.5) return w * std::cos(w) - std::sin(w);
  // sum_k (-1)^k 2k w^(2k+1) / (2k+1)!
  const double w2 = w * w;
  double term = w, sum = 0.0;
  for (int k = 1; k <= 12; ++k) {
    term *= -w2 / ((2 * k) * (2 * k + 1));
    sum += 2 * k * term;
  }
  return sum;
}

}  // namespace detail

/// Written through w cos w - sin w at w = u and u/2 so that every
/// coefficient keeps full relative accuracy as u -> 0.
inline JacobianCoeffs jacobian_coeffs(double sigma, double u) {
  const double cs = std::cos(sigma), s2 = std::sin(sigma) * std::sin(sigma);
  const double f = detail::wcos_minus_sin(u);
  const double half = std::sin(u / 2) * detail::wcos_minus_sin(u / 2);
  return {u * s2 * f, 8 * cs * cs * half + s2 * u * f, -4 * u * cs * s2 * half};
}

/// det(d gamma/da, d gamma/dtheta, d gamma/dt).
inline double jacobian_closed_form(double sigma, const CovectorInit& c, double t) {
  const double a = c.a, u = a * t;
  const double c2t = std::cos(2 * c.theta), s2t = std::sin(2 * c.theta);
  if (std::abs(u) < kSeriesSwitch) {
    const double cs = std::cos(sigma), s2 = std::sin(sigma) * std::sin(sigma);
    const double u2 = u * u, u3 = u2 * u, u4 = u2 * u2, u5 = u4 * u;
    const double A = -s2 / 6 + s2 * u2 / 60 - s2 * u4 / 1680;
    const double B = std::cos(2 * sigma) / 24 - 1.0 / 8 + (s2 / 90 + 1.0 / 180) * u2 +
                     (cs * cs / 2240 - 1.0 / 1680) * u4;
    const double C = s2 * cs * (u / 24 - u3 / 360 + u5 / 13440);
    const double t2 = t * t;
    return t2 * t2 * (A * c2t + B + C * s2t);
  }
  const auto k = jacobian_coeffs(sigma, u);
  const double a2 = a * a;
  return (k.A * c2t + k.B + k.C * s2t) / (2 * a2 * a2);
}

/// Smallest positive root of sin(r) cos^2(s) + r cos(r) sin^2(s), in [pi/2, pi].
inline double tau(double sigma) {
  const double cs = std::cos(sigma), ss = std::sin(sigma);
  if (ss == 0.0) return kPi;
  if (std::abs(cs) < 1e-15) return kPi / 2;
  const double c2 = cs * cs, s2 = ss * ss;
  return bisect_root([&](double r) { return std::sin(r) * c2 + r * std::cos(r) * s2; }, kPi / 2,
                     kPi);
}

inline double tau_residual(double sigma, double r) {
  const double cs = std::cos(sigma), ss = std::sin(sigma);
  return std::sin(r) * cs * cs + r * std::cos(r) * ss * ss;
}

/// First positive solution of tan(s) = s.
inline double s1() {
  static const double root =
      bisect_root([](double s) { return s * std::cos(s) - std::sin(s); }, kPi + 0.1,
                  1.5 * kPi - 0.01);
  return root;
}

struct ConjugateTime {
  enum class Kind { Finite, None, WholeRay };
  Kind kind = Kind::None;
  double t = std::numeric_limits<double>::infinity();
};

/// First conjugate time of the geodesic with initial covector c.
inline ConjugateTime conjugate_time(double sigma, const CovectorInit& c, int scan_nodes = 1000) {
  using K = ConjugateTime::Kind;
  const bool cos_theta_zero = std::abs(std::cos(c.theta)) < kFlatCos;
  if (cos_vanishes(sigma)) {
    if (cos_theta_zero) return {K::WholeRay, 0.0};
    if (c.a == 0.0) return {};
    return {K::Finite, s1() / std::abs(c.a)};
  }
  if (c.a == 0.0) return {};
  const double r = tau(sigma);
  const double lo = 2 * r / std::abs(c.a), hi = 2 * kPi / std::abs(c.a);
  auto jac = [&](double t) { return jacobian_closed_form(sigma, c, t); };
  // scale of Jac on the bracket, to judge an exact zero at the left end
  const double scale = 1.0 / (c.a * c.a * c.a * c.a);
  double prev_t = lo, prev = jac(lo);
  if (std::abs(prev) <= 1e-12 * scale) return {K::Finite, lo};
  for (int i = 1; i <= scan_nodes; ++i) {
    const double t = lo + (hi - lo) * i / scan_nodes;
    const double v = jac(t);
    if (v == 0.0) return {K::Finite, t};
    if ((v < 0) != (prev < 0)) return {K::Finite, bisect_root(jac, prev_t, t, 1e-13 * hi)};
    prev_t = t;
    prev = v;
  }
  // cos(theta) = 0 puts the zero exactly on the right end, where rounding may hide the sign change
  if (std::abs(prev) <= 1e-12 * scale) return {K::Finite, hi};
  throw ConvergenceError("no sign change of the Jacobian on the conjugate-time bracket",
                         std::abs(prev));
}

/// Time after which the geodesic stops minimizing; +infinity if never.
inline double cut_time(double sigma, const CovectorInit& c) {
  const double inf = std::numeric_limits<double>::infinity();
  if (c.a == 0.0) return inf;
  if (cos_vanishes(sigma)) {
    if (std::abs(std::cos(c.theta)) < kFlatCos) return inf;
    return kPi / std::abs(c.a);
  }
  return 2 * tau(sigma) / std::abs(c.a);
}

struct CutAngles {
  double plus, minus;  // representatives in [0, pi)
};

inline double reduce_mod_pi(double angle) {
  double r = std::fmod(angle, kPi);
  if (r < 0) r += kPi;
  if (r >= kPi || r == 0.0) r = 0.0;  // also folds -0 and the tie at pi
  return r;
}

/// Angles of the two half-planes carrying the cut locus.
inline CutAngles cut_angles(double sigma) {
  if (cos_vanishes(sigma)) return {0.0, 0.0};
  const double r = tau(sigma);
  const double plus = reduce_mod_pi(std::atan2(-std::cos(sigma) * std::sin(r), std::cos(r)));
  return {plus, reduce_mod_pi(-plus)};
}

/// Residuals of the two defining equations of the cut angles.
inline std::pair<double, double> cut_angle_residuals(double sigma, const CutAngles& ang) {
  const double r = tau(sigma), cs = std::cos(sigma);
  return {cs * std::cos(ang.plus) * std::sin(r) + std::cos(r) * std::sin(ang.plus),
          -cs * std::cos(ang.minus) * std::sin(r) + std::cos(r) * std::sin(ang.minus)};
}

/// Point of the cut-locus boundary curve in the upper (sign > 0) or lower
/// (sign < 0) half-plane, parameterized by a > 0.
inline Vec3 cut_locus_curve(double sigma, int sign, double a) {
  if (cos_vanishes(sigma)) throw PreconditionError("cut-locus curves need cos(sigma) != 0");
  if (!(a > 0.0)) throw PreconditionError("cut-locus curve parameter must be positive");
  const double r = tau(sigma), cs = std::cos(sigma);
  const double sgn = sign >= 0 ? 1.0 : -1.0;
  const CutAngles ang = cut_angles(sigma);
  const double th = sgn > 0 ? ang.plus : ang.minus;
  const double cr = std::cos(r), sr = std::sin(r);
  const double k = cr * cr + sr * sr * cs * cs;
  const double tn = std::tan(sgn * r);
  return {2 / a * tn * k * std::cos(th), -2 / a * tn * k * std::sin(th),
          sgn * r / (a * a) - tn / (a * a) * (cr * cr - sr * sr) * k};
}

/// B^2 - A^2 - C^2 as a product of four factors, u = a t.
inline double discriminant(double sigma, double u) {
  const double h = u / 2, c2 = std::cos(sigma) * std::cos(sigma);
  const double s2 = std::sin(sigma) * std::sin(sigma);
  const double sh = std::sin(h), ch = std::cos(h);
  return 64 * c2 * sh * (h * ch - sh) * (sh * c2 + h * ch * s2) * (h * ch - sh - h * h * sh * s2);
}

inline double discriminant_expanded(double sigma, double u) {
  const auto k = jacobian_coeffs(sigma, u);
  return k.B * k.B - k.A * k.A - k.C * k.C;
}

/// Separation determinant of neighbouring ellipses at t = 1, written as a
/// trigonometric polynomial in 2 theta.
inline double ellipse_separation(double sigma, double a, double theta) {
  const double s2 = std::sin(sigma) * std::sin(sigma), cs = std::cos(sigma);
  const double ca = std::cos(a), sa = std::sin(a);
  const double A = 0.5 * a * (a * ca - sa) * s2;
  const double B = 0.5 * (a * (a * ca - sa) - cs * cs * ((a * a - 4) * ca - 3 * a * sa + 4));
  const double C = -a * cs * (a * std::cos(a / 2) - 2 * std::sin(a / 2)) * std::sin(a / 2) * s2;
  return A * std::cos(2 * theta) + B + C * std::sin(2 * theta);
}

/// Linear map (cos theta, sin theta) -> (x, y) of the ellipse reached at time t.
inline Eigen::Matrix2d ellipse_matrix(double sigma, double a, double t) {
  const double cs = std::cos(sigma), u = a * t;
  const double su = std::sin(u), cu = std::cos(u);
  Eigen::Matrix2d m;
  if (std::abs(u) < kSeriesSwitch) {
    const Vec3 e1 = geodesic_closed_form(sigma, {0.0, a}, t);
    const Vec3 e2 = geodesic_closed_form(sigma, {kPi / 2, a}, t);
    m << e1.x(), e2.x(), e1.y(), e2.y();
    return m;
  }
  m << su / a, (cu - 1) * cs / a,
       -(cu - 1) * cs / a, ((su - u) * cs * cs + u) / a;
  return m;
}

struct SpherePoint {
  double a, theta, t;
  Vec3 q;
};

/// Endpoints gamma(a, theta, r) over a in [-a_max, a_max] (na nodes) and
/// theta in [0, 2 pi) (ntheta nodes), a_max = 2 tau / r (pi / r if cos s = 0).
/// Rows are in (a, theta) lexicographic order.
inline std::vector<SpherePoint> sphere_sample(double sigma, double r, int na, int ntheta) {
  if (!(r > 0.0)) throw PreconditionError("sphere radius must be positive");
  if (na < 1 || ntheta < 1) throw PreconditionError("grid sizes must be positive");
  const double a_max = (cos_vanishes(sigma) ? kPi : 2 * tau(sigma)) / r;
  std::vector<SpherePoint> out;
  out.reserve(static_cast<std::size_t>(na) * ntheta);
  for (int i = 0; i < na; ++i) {
    const double a = na == 1 ? 0.0 : -a_max + 2 * a_max * i / (na - 1);
    for (int k = 0; k < ntheta; ++k) {
      const double th = 2 * kPi * k / ntheta;
      out.push_back({a, th, r, geodesic_closed_form(sigma, {th, a}, r)});
    }
  }
  return out;
}

/// Whether q belongs to the cut locus of the origin.
inline bool cut_membership(double sigma, const Vec3& q, double tol = 1e-9) {
  if (cos_vanishes(sigma)) return std::abs(q.x()) <= tol && std::abs(q.z()) > tol;
  if (q.z() == 0.0) return false;
  const int sign = q.z() > 0 ? 1 : -1;
  const CutAngles ang = cut_angles(sigma);
  const double th = sign > 0 ? ang.plus : ang.minus;
  const double ct = std::cos(th), st = std::sin(th);
  if (std::abs(ct * q.y() + st * q.x()) > tol) return false;
  // in-plane coordinate along the half-plane's horizontal direction
  const double s = q.x() * ct - q.y() * st;
  const Vec3 unit = cut_locus_curve(sigma, sign, 1.0);
  const double radius1 = std::abs(unit.x() * ct - unit.y() * st);
  // the curve point at height q.z: z(a) = z(1)/a^2 is monotone in a
  const double a_star = std::sqrt(unit.z() / q.z());
  return std::abs(s) <= radius1 / a_star + tol;
}

}  // namespace ars::nilpotent
