#pragma once

// Laplacian built from the intrinsic (singular) Riemannian volume, and the
// one-dimensional reduced operator whose potential blows up on {x = 0}.

#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

#include "arsgeo/errors.hpp"
#include "arsgeo/frame.hpp"

namespace ars {

/// Delta f = sum c_ij d_i d_j f + sum c_i d_i f with mixed terms listed once.
struct LaplacianCoeffs {
  double xx = 0, yy = 0, zz = 0, yz = 0;
  double x = 0, y = 0, z = 0;
};

/// Coefficients of sum_i (X_i^2 + div(X_i) X_i) with divergence taken with
/// respect to dx dy dz / |alpha nu|.
inline LaplacianCoeffs intrinsic_laplacian_coeffs(const Frame& f, const Vec3& q) {
  const auto j = f.jet(q);
  const double a = j.alpha, b = j.beta, n = j.nu, an = a * n;
  if (an == 0.0) throw SingularSetError("intrinsic Laplacian undefined on the singular set");
  auto d_an = [&](int k) { return j.d_alpha[k] * n + a * j.d_nu[k]; };
  // divergence of X2 for the intrinsic volume
  const double m = -a * j.d_nu[1] / n + j.d_beta[2] - b * d_an(2) / an;
  LaplacianCoeffs c;
  c.xx = 1.0;
  c.yy = a * a;
  c.yz = 2 * a * b;
  c.zz = b * b + n * n;
  c.x = -d_an(0) / an;
  c.y = a * j.d_alpha[1] + b * j.d_alpha[2] + m * a;
  c.z = a * j.d_beta[1] + b * j.d_beta[2] + m * b + n * j.d_nu[2] - n * n / a * j.d_alpha[2];
  return c;
}

/// Potential of the reduced operator d^2/dx^2 - V after Fourier transform in
/// (y, z) with frequencies (mu, nu) and the ground-state conjugation.
inline double reduced_potential(double sigma, double mu, double nu, double x,
                                bool barrier_term = true) {
  if (x == 0.0) throw PreconditionError("reduced potential has a pole at x = 0");
  const double s = std::sin(sigma), c = std::cos(sigma);
  const double shift = mu + c * nu * x;
  return shift * shift + s * s * nu * nu * x * x + (barrier_term ? 0.75 / (x * x) : 0.0);
}

struct BarrierGrid {
  double L = 4.0;    // domain [-L, L]
  int n = 2000;      // cells; nodes at cell centres so none sits at 0
  double dt = 1e-3;
  double T = 1.0;
  int output_every = 10;
};

struct BarrierInit {
  bool right = true;     // side of the initial bump
  double center = 1.5;   // distance of the bump from 0
  double width = 0.3;
};

struct BarrierSample {
  double t, mass_left, mass_right;
};

/// Crank-Nicolson for d_t g = d_x^2 g - V g with homogeneous Dirichlet data
/// at +-L. Masses are h * sum g^2 over the nodes on each side of 0.
inline std::vector<BarrierSample> barrier_simulation(double sigma, double mu, double nu,
                                                     const BarrierGrid& grid,
                                                     const BarrierInit& init = {},
                                                     bool barrier_term = true) {
  if (grid.n < 2 || grid.n % 2 != 0) throw PreconditionError("cell count must be even");
  if (!(grid.L > 0) || !(grid.dt > 0) || !(grid.T > 0))
    throw PreconditionError("L, dt and T must be positive");
  const int n = grid.n;
  const double h = 2 * grid.L / n;
  std::vector<double> x(n), V(n), g(n);
  for (int i = 0; i < n; ++i) {
    x[i] = -grid.L + (i + 0.5) * h;
    V[i] = reduced_potential(sigma, mu, nu, x[i], barrier_term);
    const double c = init.right ? init.center : -init.center;
    const double r = (x[i] - c) / init.width;
    g[i] = std::exp(-0.5 * r * r);
  }
  // A = D2 - V; ghost value -g beyond each end puts the zero at +-L
  std::vector<double> diag(n), off(n > 0 ? n - 1 : 0, 1.0 / (h * h));
  for (int i = 0; i < n; ++i) diag[i] = -2.0 / (h * h) - V[i];
  diag[0] -= 1.0 / (h * h);
  diag[n - 1] -= 1.0 / (h * h);
  const double k = 0.5 * grid.dt;
  // Thomas factorization of (I - k A), constant in time
  std::vector<double> lower(n), cprime(n), denom(n);
  for (int i = 0; i < n; ++i) {
    const double bi = 1.0 - k * diag[i];
    const double ai = i > 0 ? -k * off[i - 1] : 0.0;
    const double ci = i + 1 < n ? -k * off[i] : 0.0;
    lower[i] = ai;
    denom[i] = bi - (i > 0 ? ai * cprime[i - 1] : 0.0);
    cprime[i] = ci / denom[i];
  }
  auto masses = [&](double t) {
    BarrierSample s{t, 0.0, 0.0};
    for (int i = 0; i < n; ++i) (x[i] < 0 ? s.mass_left : s.mass_right) += h * g[i] * g[i];
    return s;
  };
  std::vector<BarrierSample> out{masses(0.0)};
  const int steps = static_cast<int>(std::llround(grid.T / grid.dt));
  std::vector<double> rhs(n);
  for (int s = 1; s <= steps; ++s) {
    for (int i = 0; i < n; ++i) {
      double ag = diag[i] * g[i];
      if (i > 0) ag += off[i - 1] * g[i - 1];
      if (i + 1 < n) ag += off[i] * g[i + 1];
      rhs[i] = g[i] + k * ag;
    }
    // forward sweep then back substitution
    for (int i = 0; i < n; ++i) rhs[i] = (rhs[i] - (i > 0 ? lower[i] * rhs[i - 1] : 0.0)) / denom[i];
    for (int i = n - 2; i >= 0; --i) rhs[i] -= cprime[i] * rhs[i + 1];
    g.swap(rhs);
    if (s % std::max(grid.output_every, 1) == 0 || s == steps) out.push_back(masses(s * grid.dt));
  }
  return out;
}

inline void write_csv(std::ostream& os, const std::vector<BarrierSample>& series) {
  os << "t,mass_left,mass_right\n";
  char buf[256];
  for (const auto& s : series) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", s.t, s.mass_left, s.mass_right);
    os << buf;
  }
}

}  // namespace ars
