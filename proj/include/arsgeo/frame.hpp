#pragma once

// Triangular orthonormal frames X1 = (1,0,0), X2 = (0,alpha,beta),
// X3 = (0,0,nu): parsing, pointwise classification, metric and volume.

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "arsgeo/errors.hpp"
#include "arsgeo/expr.hpp"

namespace ars {

using Mat3 = Eigen::Matrix3d;

/// Axis-aligned box {lo[i] <= q[i] <= hi[i]}. Unbounded by default.
struct Box {
  Vec3 lo = Vec3::Constant(-std::numeric_limits<double>::infinity());
  Vec3 hi = Vec3::Constant(std::numeric_limits<double>::infinity());

  static Box cube(double half_width) {
    return {Vec3::Constant(-half_width), Vec3::Constant(half_width)};
  }
  bool contains(const Vec3& q) const {
    return (q.array() >= lo.array()).all() && (q.array() <= hi.array()).all();
  }
  bool bounded() const { return lo.allFinite() && hi.allFinite(); }
};

enum class FrameKind { Riemannian, Type1, Type2 };

inline const char* to_string(FrameKind k) {
  switch (k) {
    case FrameKind::Riemannian: return "riemannian";
    case FrameKind::Type1: return "type1";
    case FrameKind::Type2: return "type2";
  }
  return "?";
}

/// Coefficient values with their gradients at one point.
template <class T>
struct CoeffJet {
  T alpha, beta, nu;
  std::array<T, 3> d_alpha, d_beta, d_nu;
};

class Frame {
public:
  Frame(Expr alpha, Expr beta, Expr nu, std::optional<FrameKind> declared = {}, Box box = {})
      : exprs_{std::move(alpha), std::move(beta), std::move(nu)},
        declared_(declared),
        box_(box) {
    for (int c = 0; c < 3; ++c) {
      values_[c] = Program(exprs_[c]);
      for (int v = 0; v < 3; ++v) {
        partial_exprs_[c][v] = differentiate(exprs_[c], static_cast<Var>(v));
        partials_[c][v] = Program(partial_exprs_[c][v]);
      }
    }
  }

  const Expr& alpha() const { return exprs_[0]; }
  const Expr& beta() const { return exprs_[1]; }
  const Expr& nu() const { return exprs_[2]; }
  /// Symbolic partial of coefficient c (0 alpha, 1 beta, 2 nu) in variable v.
  const Expr& partial(int c, Var v) const { return partial_exprs_[c][static_cast<int>(v)]; }
  std::optional<FrameKind> declared_kind() const { return declared_; }
  const Box& box() const { return box_; }

  template <class T>
  CoeffJet<T> jet(const T& x, const T& y, const T& z) const {
    CoeffJet<T> j;
    j.alpha = values_[0].eval(x, y, z);
    j.beta = values_[1].eval(x, y, z);
    j.nu = values_[2].eval(x, y, z);
    for (int v = 0; v < 3; ++v) {
      j.d_alpha[v] = partials_[0][v].eval(x, y, z);
      j.d_beta[v] = partials_[1][v].eval(x, y, z);
      j.d_nu[v] = partials_[2][v].eval(x, y, z);
    }
    return j;
  }
  CoeffJet<double> jet(const Vec3& q) const { return jet(q.x(), q.y(), q.z()); }

  double alpha(const Vec3& q) const { return values_[0](q); }
  double beta(const Vec3& q) const { return values_[1](q); }
  double nu(const Vec3& q) const { return values_[2](q); }

  /// det(X1, X2, X3) = alpha * nu.
  double det(const Vec3& q) const { return alpha(q) * nu(q); }

  Vec3 grad_det(const Vec3& q) const {
    const auto j = jet(q);
    Vec3 g;
    for (int v = 0; v < 3; ++v) g[v] = j.d_alpha[v] * j.nu + j.alpha * j.d_nu[v];
    return g;
  }

  /// Columns are X1, X2, X3.
  Mat3 matrix(const Vec3& q) const {
    Mat3 m;
    m << 1, 0, 0,
         0, alpha(q), 0,
         0, beta(q), nu(q);
    return m;
  }

  /// [X1,X2], [X1,X3], [X2,X3] with [X,Y] = DY X - DX Y.
  std::array<Vec3, 3> brackets(const Vec3& q) const { return brackets(jet(q)); }

  static std::array<Vec3, 3> brackets(const CoeffJet<double>& j) {
    const double a = j.alpha, b = j.beta, n = j.nu;
    return {Vec3(0, j.d_alpha[0], j.d_beta[0]),
            Vec3(0, 0, j.d_nu[0]),
            Vec3(0, -n * j.d_alpha[2], a * j.d_nu[1] + b * j.d_nu[2] - n * j.d_beta[2])};
  }

private:
  std::array<Expr, 3> exprs_;
  std::array<std::array<Expr, 3>, 3> partial_exprs_;
  std::array<Program, 3> values_;
  std::array<std::array<Program, 3>, 3> partials_;
  std::optional<FrameKind> declared_;
  Box box_;
};

/// The nilpotent type-1 family: alpha = 1, beta = x cos(s), nu = x sin(s).
inline Frame nilpotent_frame(double sigma) {
  const Expr x = Expr::variable(Var::X);
  return Frame(Expr::constant(1.0), std::cos(sigma) * x, std::sin(sigma) * x, FrameKind::Type1);
}

namespace detail {

inline std::string_view trim(std::string_view s, std::size_t& offset) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  offset += b;
  return s.substr(b, e - b);
}

}  // namespace detail

/// Parses `alpha=<expr>; beta=<expr>; nu=<expr>; [kind=...;] [box=6 numbers]`.
inline Frame parse_frame_spec(std::string_view text) {
  std::optional<Expr> coeff[3];
  std::optional<FrameKind> kind;
  Box box;
  bool have_box = false;
  const detail::ExprParser locator(text, 0, text.size());

  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t stop = text.find(';', start);
    if (stop == std::string_view::npos) stop = text.size();
    std::size_t offset = start;
    const std::string_view stmt = detail::trim(text.substr(start, stop - start), offset);
    start = stop + 1;
    if (stmt.empty()) continue;

    const std::size_t eq = stmt.find('=');
    if (eq == std::string_view::npos) locator.fail("expected '<name>=<value>'", offset);
    std::size_t key_offset = offset;
    const std::string_view key = detail::trim(stmt.substr(0, eq), key_offset);
    std::size_t value_offset = offset + eq + 1;
    const std::string_view value = detail::trim(stmt.substr(eq + 1), value_offset);

    auto coefficient = [&](int c) {
      if (coeff[c]) locator.fail("duplicate " + std::string(key), key_offset);
      coeff[c] = detail::ExprParser(text, value_offset, value_offset + value.size()).parse();
    };
    if (key == "alpha") {
      coefficient(0);
    } else if (key == "beta") {
      coefficient(1);
    } else if (key == "nu") {
      coefficient(2);
    } else if (key == "kind") {
      if (value == "riemannian") kind = FrameKind::Riemannian;
      else if (value == "type1") kind = FrameKind::Type1;
      else if (value == "type2") kind = FrameKind::Type2;
      else locator.fail("unknown kind '" + std::string(value) + "'", value_offset);
    } else if (key == "box") {
      if (have_box) locator.fail("duplicate box", key_offset);
      have_box = true;
      std::array<double, 6> b{};
      std::size_t pos = 0;
      for (int i = 0; i < 6; ++i) {
        const std::size_t comma = i < 5 ? value.find(',', pos) : value.size();
        if (comma == std::string_view::npos) locator.fail("box needs 6 numbers", value_offset + pos);
        std::size_t num_offset = value_offset + pos;
        const std::string num(detail::trim(value.substr(pos, comma - pos), num_offset));
        char* end = nullptr;
        b[i] = std::strtod(num.c_str(), &end);
        if (num.empty() || end != num.c_str() + num.size())
          locator.fail("malformed box bound", num_offset);
        pos = comma + 1;
      }
      box.lo = Vec3(b[0], b[2], b[4]);
      box.hi = Vec3(b[1], b[3], b[5]);
      if (!(box.lo.array() <= box.hi.array()).all()) locator.fail("empty box", value_offset);
    } else {
      locator.fail("unknown identifier '" + std::string(key) + "'", key_offset);
    }
  }
  static constexpr const char* kNames[3] = {"alpha", "beta", "nu"};
  for (int c = 0; c < 3; ++c)
    if (!coeff[c]) locator.fail(std::string("missing ") + kNames[c], text.size());
  return Frame(*coeff[0], *coeff[1], *coeff[2], kind, box);
}

enum class PointClass { Riemannian, Type1, Type2, Degenerate };

inline const char* to_string(PointClass c) {
  switch (c) {
    case PointClass::Riemannian: return "riemannian";
    case PointClass::Type1: return "type1";
    case PointClass::Type2: return "type2";
    case PointClass::Degenerate: return "degenerate";
  }
  return "?";
}

struct Classification {
  PointClass kind;
  double det_value;
  int bracket_span_rank;  // rank of {X1, X2, X3, [X1,X2], [X1,X3], [X2,X3]}
  int frame_rank;         // rank of {X1, X2, X3}
  double grad_det_norm;
  /// max_i |<grad det, Xi>| / |grad det| over i = 1, 2; NaN off the singular set.
  double tangency_residual;
};

namespace detail {

template <class M>
int numerical_rank(const M& m, double tol) {
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s[0] == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s[i] > tol * s[0]) ++r;
  return r;
}

}  // namespace detail

inline Classification classify_point(const Frame& f, const Vec3& q, double tol = 1e-9) {
  if (!f.box().contains(q)) throw PreconditionError("point outside the frame's domain box");
  const auto j = f.jet(q);
  Classification c{};
  c.det_value = j.alpha * j.nu;
  const Mat3 m = f.matrix(q);
  const auto br = Frame::brackets(j);
  Eigen::Matrix<double, 3, 6> six;
  six << m, br[0], br[1], br[2];
  c.bracket_span_rank = detail::numerical_rank(six, tol);
  c.frame_rank = detail::numerical_rank(m, tol);
  Vec3 g;
  for (int v = 0; v < 3; ++v) g[v] = j.d_alpha[v] * j.nu + j.alpha * j.d_nu[v];
  c.grad_det_norm = g.norm();
  c.tangency_residual = std::numeric_limits<double>::quiet_NaN();
  if (std::abs(c.det_value) > tol) {
    c.kind = PointClass::Riemannian;
    return c;
  }
  if (c.bracket_span_rank < 3 || c.frame_rank < 2 || c.grad_det_norm <= tol) {
    c.kind = PointClass::Degenerate;
    return c;
  }
  c.tangency_residual =
      std::max(std::abs(g.dot(m.col(0))), std::abs(g.dot(m.col(1)))) / c.grad_det_norm;
  c.kind = c.tangency_residual <= tol ? PointClass::Type2 : PointClass::Type1;
  return c;
}

/// Riemannian metric in coordinates, (M M^T)^{-1} for the frame matrix M.
inline Mat3 metric_tensor(const Frame& f, const Vec3& q) {
  const double a = f.alpha(q), b = f.beta(q), n = f.nu(q);
  if (a * n == 0.0 || !std::isfinite(1.0 / (a * n)))
    throw SingularSetError("metric undefined: alpha*nu vanishes at the point");
  Mat3 g;
  g << 1, 0, 0,
       0, (b * b + n * n) / (a * a * n * n), -b / (a * n * n),
       0, -b / (a * n * n), 1 / (n * n);
  return g;
}

/// Density of the Riemannian volume with respect to dx dy dz.
inline double volume_density(const Frame& f, const Vec3& q) {
  const double d = f.det(q);
  if (d == 0.0 || !std::isfinite(1.0 / d))
    throw SingularSetError("volume undefined: alpha*nu vanishes at the point");
  return 1.0 / std::abs(d);
}

/// Points of {alpha*nu = 0} found by bisection on every grid edge of the box
/// that carries a sign change of det. Edges are visited x-, y-, then
/// z-directed, each in lexicographic node order.
inline std::vector<Vec3> singular_set_sample(const Frame& f, const Box& box,
                                             std::array<int, 3> cells, double tol = 1e-12) {
  if (!box.bounded()) throw PreconditionError("singular set sampling needs a bounded box");
  for (int c : cells)
    if (c < 1) throw PreconditionError("grid resolution must be positive");
  const Vec3 step = (box.hi - box.lo).cwiseQuotient(Vec3(cells[0], cells[1], cells[2]));
  auto node = [&](int i, int j, int k) {
    return Vec3(box.lo.x() + i * step.x(), box.lo.y() + j * step.y(), box.lo.z() + k * step.z());
  };
  const int nx = cells[0] + 1, ny = cells[1] + 1, nz = cells[2] + 1;
  std::vector<double> det(static_cast<std::size_t>(nx) * ny * nz);
  auto idx = [&](int i, int j, int k) { return (static_cast<std::size_t>(i) * ny + j) * nz + k; };
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k) det[idx(i, j, k)] = f.det(node(i, j, k));

  std::vector<Vec3> out;
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nz; ++k)
        if (det[idx(i, j, k)] == 0.0) out.push_back(node(i, j, k));

  auto refine = [&](Vec3 lo, Vec3 hi, double dlo) {
    for (int it = 0; it < 60; ++it) {
      const Vec3 mid = 0.5 * (lo + hi);
      const double dm = f.det(mid);
      if (std::abs(dm) <= 1e-12 || it == 59) {
        if (std::abs(dm) <= tol) out.push_back(mid);
        return;
      }
      if ((dm < 0) == (dlo < 0)) {
        lo = mid;
        dlo = dm;
      } else {
        hi = mid;
      }
    }
  };
  const std::array<std::array<int, 3>, 3> dirs{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};
  for (const auto& d : dirs)
    for (int i = 0; i + d[0] < nx; ++i)
      for (int j = 0; j + d[1] < ny; ++j)
        for (int k = 0; k + d[2] < nz; ++k) {
          const double d0 = det[idx(i, j, k)];
          const double d1 = det[idx(i + d[0], j + d[1], k + d[2])];
          if (d0 * d1 < 0.0) refine(node(i, j, k), node(i + d[0], j + d[1], k + d[2]), d0);
        }
  return out;
}

struct ResidualCheck {
  std::string name;
  double value;      // measured quantity
  double threshold;  // tolerance (or nonzero threshold)
  bool nonzero;      // true: pass iff |value| > threshold; false: pass iff |value| <= threshold
  bool passed;
};

struct NormalFormReport {
  FrameKind kind;
  std::vector<ResidualCheck> checks;
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
};

namespace detail {

/// Solves nu(x, y, z) = 0 for z by Newton from z = 0; empty when it fails.
inline std::optional<double> graph_height(const Frame& f, double x, double y) {
  double z = 0.0;
  for (int it = 0; it < 60; ++it) {
    const Vec3 q(x, y, z);
    const double n = f.nu(q);
    if (!std::isfinite(n)) return std::nullopt;
    if (std::abs(n) <= 1e-15) return z;
    const double dn = f.jet(q).d_nu[2];
    if (dn == 0.0 || !std::isfinite(dn)) return std::nullopt;
    const double step = n / dn;
    z -= step;
    if (std::abs(z) > 1.0) return std::nullopt;
    if (std::abs(step) <= 1e-15 * (1.0 + std::abs(z))) {
      if (std::abs(f.nu(Vec3(x, y, z))) <= 1e-13) return z;
      return std::nullopt;
    }
  }
  return std::nullopt;
}

/// Second partials of the graph height at the origin by 5-point stencils.
struct GraphJet {
  double value, dx, dy, dxx, dyy, dxy;
};

inline std::optional<GraphJet> graph_jet(const Frame& f, double h = 1e-3) {
  auto phi = [&](double x, double y) { return graph_height(f, x, y); };
  std::array<std::array<double, 5>, 5> g{};
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j) {
      if (i != 0 && j != 0 && (std::abs(i) != 1 || std::abs(j) != 1)) continue;
      const auto v = phi(i * h, j * h);
      if (!v) return std::nullopt;
      g[i + 2][j + 2] = *v;
    }
  auto at = [&](int i, int j) { return g[i + 2][j + 2]; };
  GraphJet r;
  r.value = at(0, 0);
  r.dx = (-at(2, 0) + 8 * at(1, 0) - 8 * at(-1, 0) + at(-2, 0)) / (12 * h);
  r.dy = (-at(0, 2) + 8 * at(0, 1) - 8 * at(0, -1) + at(0, -2)) / (12 * h);
  r.dxx = (-at(2, 0) + 16 * at(1, 0) - 30 * at(0, 0) + 16 * at(-1, 0) - at(-2, 0)) / (12 * h * h);
  r.dyy = (-at(0, 2) + 16 * at(0, 1) - 30 * at(0, 0) + 16 * at(0, -1) - at(0, -2)) / (12 * h * h);
  r.dxy = (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * h * h);
  return r;
}

}  // namespace detail

struct NormalFormTolerances {
  double pointwise = 1e-10;     // conditions evaluated exactly from the coefficients
  double finite_diff = 1e-6;    // conditions on the numerically located graph
  double nonzero = 1e-6;        // "is nonzero" thresholds
  double sample_half_width = 0.5;
  int samples = 5;
};

/// Numerical check of the conditions a normal form of the given kind must satisfy.
inline NormalFormReport validate_normal_form(const Frame& f, FrameKind kind,
                                             const NormalFormTolerances& tol = {}) {
  NormalFormReport rep{kind, {}};
  auto zero = [&](std::string name, double v, double t) {
    rep.checks.push_back({std::move(name), v, t, false, std::isfinite(v) && std::abs(v) <= t});
  };
  auto nonzero = [&](std::string name, double v, double t) {
    rep.checks.push_back({std::move(name), v, t, true, std::isfinite(v) && std::abs(v) > t});
  };
  auto safe = [](auto&& fn) {
    try {
      return fn();
    } catch (const EvalError&) {
      return std::numeric_limits<double>::quiet_NaN();
    }
  };
  const Vec3 origin = Vec3::Zero();
  zero("alpha(0)-1", safe([&] { return f.alpha(origin) - 1.0; }), tol.pointwise);
  zero("beta(0)", safe([&] { return f.beta(origin); }), tol.pointwise);

  const int n = std::max(tol.samples, 2);
  auto sample = [&](int i) { return -tol.sample_half_width + 2.0 * tol.sample_half_width * i / (n - 1); };

  switch (kind) {
    case FrameKind::Riemannian:
      zero("nu(0)-1", safe([&] { return f.nu(origin) - 1.0; }), tol.pointwise);
      break;
    case FrameKind::Type1: {
      double a1 = 0, b0 = 0, n0 = 0, unit = 0;
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          const Vec3 q(0.0, sample(i), sample(k));
          a1 = std::max(a1, safe([&] { return std::abs(f.alpha(q) - 1.0); }));
          b0 = std::max(b0, safe([&] { return std::abs(f.beta(q)); }));
          n0 = std::max(n0, safe([&] { return std::abs(f.nu(q)); }));
        }
        const Vec3 axis(0.0, 0.0, sample(i));
        unit = std::max(unit, safe([&] {
                          const auto j = f.jet(axis);
                          return std::abs(j.d_beta[0] * j.d_beta[0] + j.d_nu[0] * j.d_nu[0] - 1.0);
                        }));
      }
      zero("alpha-1 on {x=0}", a1, tol.pointwise);
      zero("beta on {x=0}", b0, tol.pointwise);
      zero("nu on {x=0}", n0, tol.pointwise);
      zero("dx(beta)^2+dx(nu)^2-1 on z-axis", unit, tol.pointwise);
      break;
    }
    case FrameKind::Type2: {
      const auto jet = detail::graph_jet(f);
      const double nan = std::numeric_limits<double>::quiet_NaN();
      rep.checks.push_back({"nu vanishes on a graph z=phi(x,y)", jet ? 0.0 : 1.0, 0.0, false,
                            jet.has_value()});
      zero("phi(0)", jet ? jet->value : nan, tol.pointwise);
      zero("dx(phi)(0)", jet ? jet->dx : nan, tol.finite_diff);
      zero("dy(phi)(0)", jet ? jet->dy : nan, tol.finite_diff);
      zero("dxy(phi)(0)", jet ? jet->dxy : nan, tol.finite_diff);
      nonzero("dxx(phi)(0)", jet ? jet->dxx : nan, tol.nonzero);
      nonzero("dyy(phi)(0)", jet ? jet->dyy : nan, tol.nonzero);
      const auto j0 = f.jet(origin);
      nonzero("dx(beta)(0)", j0.d_beta[0], tol.nonzero);
      // with nu = (z - phi) * nubar, nubar(0) is dz(nu)(0)
      nonzero("nu/(z-phi) at 0", j0.d_nu[2], tol.nonzero);
      break;
    }
  }
  return rep;
}

}  // namespace ars
