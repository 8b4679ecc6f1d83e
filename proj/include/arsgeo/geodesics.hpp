#pragma once

// Normal Hamiltonian flow H = 1/2 sum <p, Xi>^2 for triangular frames,
// exponential map and shooting for the two-point problem.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "arsgeo/dual.hpp"
#include "arsgeo/errors.hpp"
#include "arsgeo/frame.hpp"

namespace ars {

struct PhaseState {
  Vec3 q = Vec3::Zero();
  Vec3 p = Vec3::Zero();
};

/// Initial covector (cos theta, sin theta, a).
struct CovectorInit {
  double theta = 0.0;
  double a = 0.0;
  Vec3 covector() const { return {std::cos(theta), std::sin(theta), a}; }
};

inline double hamiltonian(const Frame& f, const PhaseState& s) {
  const double u2 = f.alpha(s.q) * s.p.y() + f.beta(s.q) * s.p.z();
  const double u3 = f.nu(s.q) * s.p.z();
  return 0.5 * (s.p.x() * s.p.x() + u2 * u2 + u3 * u3);
}

namespace detail {

template <class T>
using State6 = std::array<T, 6>;  // x, y, z, px, py, pz

template <class T>
State6<T> hamilton_rhs(const Frame& f, const State6<T>& s) {
  const CoeffJet<T> j = f.jet(s[0], s[1], s[2]);
  const T& py = s[4];
  const T& pz = s[5];
  const T u2 = j.alpha * py + j.beta * pz;
  const T u3 = j.nu * pz;
  State6<T> d;
  d[0] = s[3];
  d[1] = j.alpha * u2;
  d[2] = j.beta * u2 + j.nu * u3;
  for (int k = 0; k < 3; ++k)
    d[3 + k] = -(u2 * (j.d_alpha[k] * py + j.d_beta[k] * pz) + u3 * j.d_nu[k] * pz);
  return d;
}

template <class T, class H>
State6<T> rk4_step(const Frame& f, const State6<T>& s, const H& h) {
  auto axpy = [](const State6<T>& a, const State6<T>& k, const auto& c) {
    State6<T> r;
    for (int i = 0; i < 6; ++i) r[i] = a[i] + c * k[i];
    return r;
  };
  const State6<T> k1 = hamilton_rhs(f, s);
  const State6<T> k2 = hamilton_rhs(f, axpy(s, k1, 0.5 * h));
  const State6<T> k3 = hamilton_rhs(f, axpy(s, k2, 0.5 * h));
  const State6<T> k4 = hamilton_rhs(f, axpy(s, k3, h));
  State6<T> r;
  for (int i = 0; i < 6; ++i) r[i] = s[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
  return r;
}

inline int step_count(double T, double h) {
  return std::max(1, static_cast<int>(std::ceil(T / h - 1e-9)));
}

inline State6<double> pack(const PhaseState& s) {
  return {s.q.x(), s.q.y(), s.q.z(), s.p.x(), s.p.y(), s.p.z()};
}

inline PhaseState unpack(const State6<double>& s) {
  return {Vec3(s[0], s[1], s[2]), Vec3(s[3], s[4], s[5])};
}

inline void check_box(const Frame& f, const State6<double>& s) {
  for (double v : s)
    if (!std::isfinite(v)) throw EvalError("geodesic state became non-finite");
  if (!f.box().contains(Vec3(s[0], s[1], s[2]))) throw EvalError("geodesic left the domain box");
}

}  // namespace detail

struct GeodesicSample {
  double t;
  PhaseState state;
};

struct GeodesicPath {
  std::vector<GeodesicSample> samples;
  double h = 0.0;                  // step actually used, T / ceil(T / h)
  double hamiltonian_drift = 0.0;  // max |H(t) - H(0)| over all steps
};

/// Classical RK4 with a fixed step adjusted so that the last step lands on T.
/// Every `stride`-th step is recorded (the endpoint always is).
inline GeodesicPath integrate_geodesic(const Frame& f, const PhaseState& s0, double T,
                                       double h = 1e-3, int stride = 1) {
  if (!(T > 0.0)) throw PreconditionError("integration time must be positive");
  if (!(h > 0.0)) throw PreconditionError("step size must be positive");
  stride = std::max(stride, 1);
  const int n = detail::step_count(T, h);
  GeodesicPath path;
  path.h = T / n;
  auto s = detail::pack(s0);
  detail::check_box(f, s);
  const double h0 = hamiltonian(f, s0);
  path.samples.push_back({0.0, s0});
  for (int i = 1; i <= n; ++i) {
    s = detail::rk4_step(f, s, path.h);
    detail::check_box(f, s);
    const PhaseState ps = detail::unpack(s);
    path.hamiltonian_drift = std::max(path.hamiltonian_drift, std::abs(hamiltonian(f, ps) - h0));
    if (i % stride == 0 || i == n) path.samples.push_back({i == n ? T : i * path.h, ps});
  }
  return path;
}

/// Endpoint only, without storing the path.
inline PhaseState flow(const Frame& f, const PhaseState& s0, double T, double h = 1e-3) {
  if (T == 0.0) return s0;
  if (!(T > 0.0)) throw PreconditionError("integration time must be non-negative");
  const int n = detail::step_count(T, h);
  const double he = T / n;
  auto s = detail::pack(s0);
  for (int i = 0; i < n; ++i) s = detail::rk4_step(f, s, he);
  detail::check_box(f, s);
  return detail::unpack(s);
}

/// Length of the projected curve, trapezoid rule on sqrt(2H).
inline double path_length(const Frame& f, const GeodesicPath& path) {
  double len = 0.0;
  for (std::size_t i = 1; i < path.samples.size(); ++i) {
    const double dt = path.samples[i].t - path.samples[i - 1].t;
    len += 0.5 * dt *
           (std::sqrt(2.0 * hamiltonian(f, path.samples[i].state)) +
            std::sqrt(2.0 * hamiltonian(f, path.samples[i - 1].state)));
  }
  return len;
}

inline Vec3 exponential_map(const Frame& f, const Vec3& q0, const Vec3& p0, double t,
                            double h = 1e-3) {
  const PhaseState s0{q0, p0};
  if (std::abs(hamiltonian(f, s0) - 0.5) > 1e-12)
    throw PreconditionError("initial covector is not arclength-normalized (H != 1/2)");
  return flow(f, s0, t, h).q;
}

inline Vec3 exponential_map(const Frame& f, const Vec3& q0, const CovectorInit& c, double t,
                            double h = 1e-3) {
  return exponential_map(f, q0, c.covector(), t, h);
}

inline void write_csv(std::ostream& os, const GeodesicPath& path) {
  os << "t,x,y,z,px,py,pz\n";
  char buf[512];
  for (const auto& s : path.samples) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", s.t,
                  s.state.q.x(), s.state.q.y(), s.state.q.z(), s.state.p.x(), s.state.p.y(),
                  s.state.p.z());
    os << buf;
  }
}

struct ShootOptions {
  int theta_seeds = 16;
  std::vector<double> a_seeds{0.0, 0.25, -0.25, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0, 4.0, -4.0};
  double coarse_h = 1e-2;  // step used while Newton explores from the seeds
  double h = 1e-3;         // step of the final, reported solve
  double tol = 1e-8;       // residual accepted on the final solve
  double coarse_tol = 1e-7;
  int max_iterations = 60;
  int max_halvings = 40;
  double max_time_factor = 8.0;  // reject shots longer than this times |q1 - q0| + 1
  /// Coarse solutions within this much of the shortest one are all refined.
  double refine_window = 1e-2;
};

struct ShootResult {
  double distance = 0.0;
  CovectorInit init;
  Vec3 covector = Vec3::Zero();  // normalized so that H = 1/2
  double residual = 0.0;
  int seed_index = -1;
  int converged_seeds = 0;
};

namespace detail {

/// Covector of the shooting parameters, rescaled to H = 1/2 at q0.
template <class T>
std::array<T, 3> shoot_covector(const Frame& f, const Vec3& q0, const T& theta, const T& a) {
  using std::cos, std::sin, std::sqrt;
  const T px = cos(theta), py = sin(theta);
  const double al = f.alpha(q0), be = f.beta(q0), nu = f.nu(q0);
  const T u2 = al * py + be * a;
  const T u3 = nu * a;
  const T scale = sqrt(px * px + u2 * u2 + u3 * u3);
  return {px / scale, py / scale, a / scale};
}

inline double covector_norm(const Frame& f, const Vec3& q0, double theta, double a) {
  const double u2 = f.alpha(q0) * std::sin(theta) + f.beta(q0) * a;
  const double u3 = f.nu(q0) * a;
  return std::sqrt(std::cos(theta) * std::cos(theta) + u2 * u2 + u3 * u3);
}

struct ShotEval {
  Vec3 residual;
  Eigen::Matrix3d jacobian;
};

/// Endpoint residual and its exact derivative in (theta, a, t) for the
/// discrete RK4 map at a fixed number of steps.
inline ShotEval shoot_eval(const Frame& f, const Vec3& q0, const Vec3& q1, const Vec3& x,
                           double h) {
  using D = Dual<3>;
  const D theta = D::seeded(x[0], 0), a = D::seeded(x[1], 1), t = D::seeded(x[2], 2);
  const auto p = shoot_covector(f, q0, theta, a);
  State6<D> s{D(q0.x()), D(q0.y()), D(q0.z()), p[0], p[1], p[2]};
  const int n = step_count(x[2], h);
  const D he = t / static_cast<double>(n);
  for (int i = 0; i < n; ++i) s = rk4_step(f, s, he);
  ShotEval r;
  for (int i = 0; i < 3; ++i) {
    if (!std::isfinite(s[i].v)) throw EvalError("shot diverged");
    r.residual[i] = s[i].v - q1[i];
    for (int k = 0; k < 3; ++k) r.jacobian(i, k) = s[i].d[k];
  }
  if (!f.box().contains(Vec3(s[0].v, s[1].v, s[2].v)))
    throw EvalError("geodesic left the domain box");
  return r;
}

inline double shoot_residual(const Frame& f, const Vec3& q0, const Vec3& q1, const Vec3& x,
                             double h) {
  const auto p = shoot_covector(f, q0, x[0], x[1]);
  const PhaseState end = flow(f, {q0, Vec3(p[0], p[1], p[2])}, x[2], h);
  const double r = (end.q - q1).norm();
  return std::isfinite(r) ? r : std::numeric_limits<double>::infinity();
}

struct NewtonOutcome {
  Vec3 x;
  double residual;
  bool converged;
};

inline NewtonOutcome damped_newton(const Frame& f, const Vec3& q0, const Vec3& q1, Vec3 x,
                                   double h, double tol, double t_max, const ShootOptions& o) {
  double res = std::numeric_limits<double>::infinity();
  try {
    for (int it = 0; it < o.max_iterations; ++it) {
      const ShotEval e = shoot_eval(f, q0, q1, x, h);
      res = e.residual.norm();
      if (res <= tol) return {x, res, true};
      const Eigen::JacobiSVD<Eigen::Matrix3d> svd(e.jacobian, Eigen::ComputeFullU | Eigen::ComputeFullV);
      Eigen::Vector3d s = svd.singularValues();
      const double cut = 1e-10 * s[0];
      Eigen::Vector3d coeff = svd.matrixU().transpose() * e.residual;
      for (int i = 0; i < 3; ++i) coeff[i] = s[i] > cut ? coeff[i] / s[i] : 0.0;
      const Vec3 step = -(svd.matrixV() * coeff);
      double lambda = 1.0;
      bool improved = false;
      for (int k = 0; k <= o.max_halvings; ++k, lambda *= 0.5) {
        const Vec3 trial = x + lambda * step;
        if (!(trial[2] > 0.0) || trial[2] > t_max) continue;
        double r = std::numeric_limits<double>::infinity();
        try {
          r = shoot_residual(f, q0, q1, trial, h);
        } catch (const EvalError&) {
          continue;
        }
        if (r < res) {
          x = trial;
          improved = true;
          break;
        }
      }
      if (!improved) break;
    }
    if (res > tol) res = std::min(res, shoot_residual(f, q0, q1, x, h));
  } catch (const EvalError&) {
    return {x, res, false};
  }
  return {x, res, res <= tol};
}

}  // namespace detail

/// Multistart shooting for the shortest geodesic from q0 to q1. Newton runs
/// from every seed on a coarse step, then the shortest candidates are
/// re-solved on the fine step. The returned length is an upper bound for the
/// distance, exact when the minimizer lies in some seed's basin.
inline ShootResult shoot_distance(const Frame& f, const Vec3& q0, const Vec3& q1,
                                  const ShootOptions& o = {}) {
  if (!f.box().contains(q0) || !f.box().contains(q1))
    throw PreconditionError("endpoints must lie in the frame's domain box");
  const double gap = (q1 - q0).norm();
  if (gap == 0.0) return {};
  const double t_max = o.max_time_factor * (gap + 1.0);
  const double scale = std::numbers::pi / gap;

  struct Candidate {
    Vec3 x;
    double residual;
    int seed;
  };
  std::vector<Candidate> coarse;
  double best_residual = std::numeric_limits<double>::infinity();
  int seed = 0;
  for (double a_unit : o.a_seeds) {
    for (int k = 0; k < o.theta_seeds; ++k, ++seed) {
      const double theta = 2.0 * std::numbers::pi * k / o.theta_seeds;
      const double a = a_unit * scale;
      const double norm = detail::covector_norm(f, q0, theta, a);
      if (!(norm > 1e-12) || !std::isfinite(norm)) continue;
      const auto out = detail::damped_newton(f, q0, q1, Vec3(theta, a, gap), o.coarse_h,
                                             o.coarse_tol, t_max, o);
      best_residual = std::min(best_residual, out.residual);
      if (out.converged) coarse.push_back({out.x, out.residual, seed});
    }
  }
  if (coarse.empty()) throw ConvergenceError("no shooting seed converged", best_residual);

  std::sort(coarse.begin(), coarse.end(), [](const Candidate& l, const Candidate& r) {
    if (l.x[2] != r.x[2]) return l.x[2] < r.x[2];
    if (l.residual != r.residual) return l.residual < r.residual;
    return l.seed < r.seed;
  });
  // the window opens at the shortest coarse solution that survives the fine
  // step; coarse artefacts (huge a, a single unresolved step) do not
  double window = std::numeric_limits<double>::infinity();
  std::vector<Candidate> fine;
  std::vector<Vec3> visited;
  for (const auto& c : coarse) {
    if (c.x[2] > window) break;
    bool duplicate = false;
    for (const auto& v : visited) {
      const double dtheta = std::remainder(c.x[0] - v[0], 2.0 * std::numbers::pi);
      if (std::abs(dtheta) < 1e-6 && std::abs(c.x[1] - v[1]) < 1e-6 && std::abs(c.x[2] - v[2]) < 1e-6)
        duplicate = true;
    }
    if (duplicate) continue;
    visited.push_back(c.x);
    const auto out = detail::damped_newton(f, q0, q1, c.x, o.h, o.tol, t_max, o);
    best_residual = std::min(best_residual, out.residual);
    if (out.converged) {
      fine.push_back({out.x, out.residual, c.seed});
      window = std::min(window, c.x[2] + o.refine_window);
    }
  }
  if (fine.empty()) throw ConvergenceError("no shooting candidate converged on the fine step", best_residual);
  const auto win = std::min_element(fine.begin(), fine.end(), [](const Candidate& l, const Candidate& r) {
    if (l.x[2] != r.x[2]) return l.x[2] < r.x[2];
    if (l.residual != r.residual) return l.residual < r.residual;
    return l.seed < r.seed;
  });
  ShootResult r;
  r.distance = win->x[2];
  r.init = {std::remainder(win->x[0], 2.0 * std::numbers::pi), win->x[1]};
  const auto p = detail::shoot_covector(f, q0, win->x[0], win->x[1]);
  r.covector = Vec3(p[0], p[1], p[2]);
  r.residual = win->residual;
  r.seed_index = win->seed;
  r.converged_seeds = static_cast<int>(coarse.size());
  return r;
}

}  // namespace ars
