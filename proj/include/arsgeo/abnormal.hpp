#pragma once

// Abnormal extremals: the direction field they follow on the singular set,
// tracing, and the linearized field near type-2 points.

#include <cmath>
#include <complex>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "arsgeo/errors.hpp"
#include "arsgeo/frame.hpp"

namespace ars {

struct AbnormalControls {
  double u1 = 0, u2 = 0, u3 = 0;
};

namespace detail {

/// det(X1, X2, v) for X1 = e1, X2 = (0, alpha, beta).
inline double det_with_frame(const CoeffJet<double>& j, const Vec3& v) {
  return j.alpha * v.z() - j.beta * v.y();
}

inline AbnormalControls controls_unchecked(const Frame& f, const Vec3& q) {
  const auto j = f.jet(q);
  const auto br = Frame::brackets(j);  // [X1,X2], [X1,X3], [X2,X3]
  // u_i = det(X1, X2, [X_{i-1}, X_{i+1}]) with X0 = X3, X4 = X1
  return {-det_with_frame(j, br[2]), det_with_frame(j, br[1]), -det_with_frame(j, br[0])};
}

inline Vec3 field_unchecked(const Frame& f, const Vec3& q) {
  const auto u = controls_unchecked(f, q);
  return Vec3(u.u1, u.u2 * f.alpha(q), u.u2 * f.beta(q) + u.u3 * f.nu(q));
}

inline void require_singular(const Frame& f, const Vec3& q, double tol) {
  if (std::abs(f.det(q)) > tol)
    throw PreconditionError("point is not on the singular set (|alpha*nu| > tol)");
}

}  // namespace detail

inline AbnormalControls abnormal_controls(const Frame& f, const Vec3& q, double tol = 1e-9) {
  detail::require_singular(f, q, tol);
  return detail::controls_unchecked(f, q);
}

/// u1 X1 + u2 X2 + u3 X3 at a point of the singular set.
inline Vec3 abnormal_field(const Frame& f, const Vec3& q, double tol = 1e-9) {
  detail::require_singular(f, q, tol);
  return detail::field_unchecked(f, q);
}

/// Unit covector X1 x X2 = (0, -beta, alpha) / |.|, annihilating X1 and X2.
inline Vec3 abnormal_covector(const Frame& f, const Vec3& q) {
  const Vec3 p(0.0, -f.beta(q), f.alpha(q));
  return p / p.norm();
}

struct AbnormalSample {
  double t;
  Vec3 q;
  AbnormalControls u;
};

struct AbnormalTraceOptions {
  double tol = 1e-9;            // singular-set membership of the start point
  double pole_threshold = 1e-10;
  bool normalized = false;      // follow X / |X| instead of X
  double projection_tol = 1e-12;
  int projection_steps = 5;
  int stride = 1;
};

/// RK4 along the abnormal field, each step followed by Newton steps along
/// grad(det) that pull the point back onto the singular set.
inline std::vector<AbnormalSample> trace_abnormal(const Frame& f, const Vec3& q0, double T,
                                                  double h, const AbnormalTraceOptions& o = {}) {
  if (!(T > 0.0) || !(h > 0.0)) throw PreconditionError("duration and step must be positive");
  detail::require_singular(f, q0, o.tol);
  auto rhs = [&](const Vec3& q) {
    const Vec3 x = detail::field_unchecked(f, q);
    const double n = x.norm();
    if (!(n >= o.pole_threshold))
      throw FieldVanishesError("abnormal field vanishes: trajectory reached a pole");
    return o.normalized ? Vec3(x / n) : x;
  };
  rhs(q0);
  auto project = [&](Vec3 q) {
    for (int k = 0; k < o.projection_steps; ++k) {
      const double d = f.det(q);
      if (std::abs(d) <= o.projection_tol) break;
      const Vec3 g = f.grad_det(q);
      const double g2 = g.squaredNorm();
      if (g2 == 0.0) break;
      q -= (d / g2) * g;
    }
    return q;
  };
  const int n = std::max(1, static_cast<int>(std::ceil(T / h - 1e-9)));
  const double he = T / n;
  std::vector<AbnormalSample> out;
  out.push_back({0.0, q0, detail::controls_unchecked(f, q0)});
  Vec3 q = q0;
  for (int i = 1; i <= n; ++i) {
    const Vec3 k1 = rhs(q);
    const Vec3 k2 = rhs(q + 0.5 * he * k1);
    const Vec3 k3 = rhs(q + 0.5 * he * k2);
    const Vec3 k4 = rhs(q + he * k3);
    q = project(q + (he / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4));
    if (!f.box().contains(q)) throw EvalError("abnormal trace left the domain box");
    if (i % std::max(o.stride, 1) == 0 || i == n)
      out.push_back({i == n ? T : i * he, q, detail::controls_unchecked(f, q)});
  }
  return out;
}

inline void write_csv(std::ostream& os, const std::vector<AbnormalSample>& trace) {
  os << "t,x,y,z,u1,u2,u3\n";
  char buf[512];
  for (const auto& s : trace) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t, s.q.x(),
                  s.q.y(), s.q.z(), s.u.u1, s.u.u2, s.u.u3);
    os << buf;
  }
}

enum class StabilityKind { StableNode, StableSpiral, UnstableNode, UnstableSpiral, Saddle, Center, Degenerate };

inline const char* to_string(StabilityKind k) {
  switch (k) {
    case StabilityKind::StableNode: return "stable node";
    case StabilityKind::StableSpiral: return "stable spiral";
    case StabilityKind::UnstableNode: return "unstable node";
    case StabilityKind::UnstableSpiral: return "unstable spiral";
    case StabilityKind::Saddle: return "saddle";
    case StabilityKind::Center: return "center";
    case StabilityKind::Degenerate: return "degenerate";
  }
  return "?";
}

inline StabilityKind classify_linear(const Eigen::Matrix2d& m, double tol = 1e-12) {
  const double tr = m.trace(), det = m.determinant();
  if (std::abs(det) <= tol) return StabilityKind::Degenerate;
  if (det < 0) return StabilityKind::Saddle;
  if (std::abs(tr) <= tol) return StabilityKind::Center;
  const bool spiral = tr * tr - 4 * det < 0;
  if (tr < 0) return spiral ? StabilityKind::StableSpiral : StabilityKind::StableNode;
  return spiral ? StabilityKind::UnstableSpiral : StabilityKind::UnstableNode;
}

struct Type2Linearization {
  double phi_xx, phi_yy, phi_xy;  // second partials of the singular surface z = phi(x, y)
  double beta_x;                  // dx(beta) at the origin
  Eigen::Matrix2d matrix;   // d/dt (x, y) = matrix * (x, y) on the surface
  std::complex<double> eigenvalues[2];
  StabilityKind stability;
  PointClass origin_class;
  /// u1(0) = -dx(beta)(0) must be nonzero for trajectories not to reach the pole.
  bool nondegenerate;
};

/// Linearization at the origin of the abnormal field restricted to the
/// singular surface, in the coordinates (x, y).
inline Type2Linearization type2_linearization(const Frame& f, double tol = 1e-9) {
  const Vec3 origin = Vec3::Zero();
  const auto cls = classify_point(f, origin, tol);
  if (cls.kind == PointClass::Riemannian || cls.kind == PointClass::Type1)
    throw PreconditionError(std::string("origin is not a type-2 point (classified ") +
                            to_string(cls.kind) + ")");
  const auto jet = detail::graph_jet(f);
  if (!jet) throw PreconditionError("singular set is not a graph z = phi(x, y) near the origin");
  Type2Linearization r;
  r.phi_xx = jet->dxx;
  r.phi_yy = jet->dyy;
  r.phi_xy = jet->dxy;
  const auto j = f.jet(origin);
  r.beta_x = j.d_beta[0];
  // On the surface nu_x = -nu_z phi_x and nu_y = -nu_z phi_y, so the field is
  // alpha^2 nu_z (phi_y - beta / alpha, -phi_x); linearize at phi_x = phi_y = beta = 0.
  // In the normal form (alpha = nu_z = 1, beta = x beta1, no xy term) this is
  // [[-beta_x, phi_yy], [-phi_xx, 0]].
  const double scale = j.alpha * j.alpha * j.d_nu[2];
  r.matrix << r.phi_xy - j.d_beta[0] / j.alpha, r.phi_yy - j.d_beta[1] / j.alpha, -r.phi_xx, -r.phi_xy;
  r.matrix *= scale;
  const double tr = r.matrix.trace(), det = r.matrix.determinant();
  const std::complex<double> disc = std::sqrt(std::complex<double>(tr * tr - 4 * det));
  r.eigenvalues[0] = 0.5 * (tr + disc);
  r.eigenvalues[1] = 0.5 * (tr - disc);
  r.stability = classify_linear(r.matrix);
  r.origin_class = cls.kind;
  r.nondegenerate = std::abs(r.beta_x) > tol;
  return r;
}

}  // namespace ars
