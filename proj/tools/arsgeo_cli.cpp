// Command-line front end. Every subcommand produces one table, written as CSV
// or JSON, plus a JSON run manifest.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "arsgeo.hpp"

namespace {

using ars::Vec3;
using json = nlohmann::json;

constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------- output

using Cell = std::variant<double, long long, bool, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  json meta = json::object();

  void add(std::vector<Cell> row) { rows.push_back(std::move(row)); }
};

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) return format_double(v);
        else if constexpr (std::is_same_v<T, long long>) return std::to_string(v);
        else if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if (v.find_first_of(",\"\n") == std::string::npos) return v;
        else {
          std::string q = "\"";
          for (char ch : v) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
          return q + "\"";
        }
      },
      c);
}

json json_cell(const Cell& c) {
  return std::visit(
      [](const auto& v) -> json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, double>) {
          if (std::isfinite(v)) return v;
          return std::isnan(v) ? json("nan") : json(v > 0 ? "inf" : "-inf");
        } else {
          return v;
        }
      },
      c);
}

void write_table(std::ostream& os, const Table& t, const std::string& format, const std::string& command) {
  if (format == "json") {
    json doc;
    doc["command"] = command;
    doc["columns"] = t.columns;
    json rows = json::array();
    for (const auto& r : t.rows) {
      json row = json::object();
      for (std::size_t i = 0; i < r.size(); ++i) row[t.columns[i]] = json_cell(r[i]);
      rows.push_back(std::move(row));
    }
    doc["rows"] = std::move(rows);
    if (!t.meta.empty()) doc["meta"] = t.meta;
    os << doc.dump(2) << "\n";
    return;
  }
  for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << t.columns[i];
  os << "\n";
  for (const auto& r : t.rows) {
    for (std::size_t i = 0; i < r.size(); ++i) os << (i ? "," : "") << csv_cell(r[i]);
    os << "\n";
  }
}

// ---------------------------------------------------------------- inputs

Vec3 parse_point(const std::string& text, const std::string& what) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw CLI::ValidationError(what, "expected three comma-separated numbers, got '" + text + "'");
    }
  }
  if (v.size() != 3) throw CLI::ValidationError(what, "expected three comma-separated numbers, got '" + text + "'");
  return Vec3(v[0], v[1], v[2]);
}

struct FrameSource {
  std::string text, file;
  std::optional<double> sigma;

  void attach(CLI::App* app, bool allow_sigma = true) {
    app->add_option("--frame", text, "frame text, e.g. \"alpha=1; beta=x; nu=z+x^2+y^2\"");
    app->add_option("--frame-file", file, "file holding the frame text");
    if (allow_sigma) app->add_option("--sigma", sigma, "use the nilpotent frame with this sigma");
  }

  ars::Frame load() const {
    const int given = !text.empty() + !file.empty() + sigma.has_value();
    if (given != 1) throw CLI::ValidationError("frame", "give exactly one of --frame, --frame-file, --sigma");
    if (sigma) return ars::nilpotent_frame(*sigma);
    if (!text.empty()) return ars::parse_frame_spec(text);
    std::ifstream in(file);
    if (!in) throw CLI::ValidationError("--frame-file", "cannot read '" + file + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ars::parse_frame_spec(ss.str());
  }
};

std::vector<double> linspace(double lo, double hi, int n) {
  std::vector<double> v;
  for (int i = 0; i < n; ++i) v.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
  return v;
}

// ---------------------------------------------------------------- commands

struct ClassifyCmd {
  FrameSource frame;
  std::vector<std::string> points;
  std::string sample;
  double tol = 1e-9;

  Table run() const {
    const auto f = frame.load();
    Table t;
    if (!sample.empty()) {
      const Vec3 n = parse_point(sample, "--singular-sample");
      if (!f.box().bounded()) throw ars::PreconditionError("singular-set sampling needs a bounded box (box=...)");
      t.columns = {"x", "y", "z", "det"};
      for (const Vec3& q : ars::singular_set_sample(f, f.box(), {int(n.x()), int(n.y()), int(n.z())}))
        t.add({q.x(), q.y(), q.z(), f.det(q)});
      return t;
    }
    if (points.empty()) throw CLI::ValidationError("--point", "at least one point is required");
    t.columns = {"x", "y", "z", "class", "det", "bracket_rank", "frame_rank", "grad_det_norm", "tangency"};
    for (const auto& s : points) {
      const Vec3 q = parse_point(s, "--point");
      const auto c = ars::classify_point(f, q, tol);
      t.add({q.x(), q.y(), q.z(), std::string(ars::to_string(c.kind)), c.det_value,
             (long long)c.bracket_span_rank, (long long)c.frame_rank, c.grad_det_norm, c.tangency_residual});
    }
    return t;
  }
};

struct GeodesicCmd {
  FrameSource frame;
  std::string from = "0,0,0", covector;
  double theta = 0, a = 0, T = 1, h = 1e-3;
  int stride = 10;
  bool closed_form = false;

  Vec3 initial_covector() const {
    return covector.empty() ? ars::CovectorInit{theta, a}.covector() : parse_point(covector, "--covector");
  }

  Table run() const {
    Table t;
    if (closed_form) {
      if (!frame.sigma || !frame.text.empty() || !frame.file.empty())
        throw CLI::ValidationError("--closed-form", "closed form needs --sigma and no other frame");
      if (parse_point(from, "--from").norm() != 0.0)
        throw ars::PreconditionError("closed form starts at the origin");
      ars::nilpotent::check_sigma(*frame.sigma);
      t.columns = {"t", "x", "y", "z"};
      const int n = ars::detail::step_count(T, h);
      for (int i = 0; i <= n; i += std::max(stride, 1)) {
        const double s = T * i / n;
        const Vec3 q = ars::nilpotent::geodesic_closed_form(*frame.sigma, {theta, a}, s);
        t.add({s, q.x(), q.y(), q.z()});
      }
      if (n % std::max(stride, 1) != 0) {
        const Vec3 q = ars::nilpotent::geodesic_closed_form(*frame.sigma, {theta, a}, T);
        t.add({T, q.x(), q.y(), q.z()});
      }
      return t;
    }
    const auto f = frame.load();
    const ars::PhaseState s0{parse_point(from, "--from"), initial_covector()};
    const auto path = ars::integrate_geodesic(f, s0, T, h, stride);
    t.columns = {"t", "x", "y", "z", "px", "py", "pz"};
    for (const auto& s : path.samples)
      t.add({s.t, s.state.q.x(), s.state.q.y(), s.state.q.z(), s.state.p.x(), s.state.p.y(), s.state.p.z()});
    t.meta["hamiltonian_drift"] = path.hamiltonian_drift;
    t.meta["length"] = ars::path_length(f, path);
    return t;
  }
};

struct ExpMapCmd {
  FrameSource frame;
  std::string from = "0,0,0";
  double theta = 0, a = 0, t = 1, h = 1e-3;

  Table run() const {
    const auto f = frame.load();
    const Vec3 q = ars::exponential_map(f, parse_point(from, "--from"), ars::CovectorInit{theta, a}, t, h);
    Table out;
    out.columns = {"theta", "a", "t", "x", "y", "z"};
    out.add({theta, a, t, q.x(), q.y(), q.z()});
    return out;
  }
};

struct DistanceCmd {
  FrameSource frame;
  std::string from = "0,0,0", to;
  ars::ShootOptions opts;

  Table run() const {
    const auto f = frame.load();
    const Vec3 q0 = parse_point(from, "--from"), q1 = parse_point(to, "--to");
    const auto r = ars::shoot_distance(f, q0, q1, opts);
    Table t;
    t.columns = {"x0", "y0", "z0", "x1", "y1", "z1", "distance", "theta", "a", "residual", "converged_seeds"};
    t.add({q0.x(), q0.y(), q0.z(), q1.x(), q1.y(), q1.z(), r.distance, r.init.theta, r.init.a, r.residual,
           (long long)r.converged_seeds});
    return t;
  }
};

const char* conj_kind(ars::nilpotent::ConjugateTime::Kind k) {
  using K = ars::nilpotent::ConjugateTime::Kind;
  return k == K::Finite ? "finite" : k == K::None ? "none" : "whole-ray";
}

struct ConjugateCmd {
  double sigma = 0;
  std::optional<double> a, theta;
  int na = 16, ntheta = 32, scan = 1000;
  double a_min = 0.25, a_max = 4;

  Table run() const {
    namespace nil = ars::nilpotent;
    Table t;
    t.columns = {"a", "theta", "kind", "t_conj", "x", "y", "z"};
    auto row = [&](double av, double th) {
      const auto c = nil::conjugate_time(sigma, {th, av}, scan);
      const Vec3 q = c.kind == nil::ConjugateTime::Kind::Finite ? nil::geodesic_closed_form(sigma, {th, av}, c.t)
                                                                 : Vec3::Constant(NAN);
      t.add({av, th, std::string(conj_kind(c.kind)), c.t, q.x(), q.y(), q.z()});
    };
    if (a.has_value() != theta.has_value()) throw CLI::ValidationError("--a/--theta", "give both or neither");
    if (a) {
      row(*a, *theta);
      return t;
    }
    if (na < 1 || ntheta < 1) throw CLI::ValidationError("--na/--ntheta", "grid sizes must be positive");
    for (double av : linspace(a_min, a_max, na))
      for (int k = 0; k < ntheta; ++k) row(av, 2 * ars::nilpotent::kPi * k / ntheta);
    return t;
  }
};

struct CutCmd {
  double sigma = 0;
  std::string point;
  std::optional<double> a, theta;
  bool angles = false;
  int na = 32;
  double a_min = 0.25, a_max = 4, tol = 1e-9;

  Table run() const {
    namespace nil = ars::nilpotent;
    nil::check_sigma(sigma);
    Table t;
    const auto ang = nil::cut_angles(sigma);
    t.meta["theta_plus"] = ang.plus;
    t.meta["theta_minus"] = ang.minus;
    if (!point.empty()) {
      const Vec3 q = parse_point(point, "--point");
      t.columns = {"sigma", "x", "y", "z", "member"};
      t.add({sigma, q.x(), q.y(), q.z(), nil::cut_membership(sigma, q, tol)});
      return t;
    }
    if (a.has_value() != theta.has_value()) throw CLI::ValidationError("--a/--theta", "give both or neither");
    if (a) {
      t.columns = {"sigma", "a", "theta", "t_cut"};
      t.add({sigma, *a, *theta, nil::cut_time(sigma, {*theta, *a})});
      return t;
    }
    if (angles) {
      const auto [rp, rm] = nil::cut_angle_residuals(sigma, ang);
      t.columns = {"sigma", "theta_plus", "theta_minus", "residual_plus", "residual_minus"};
      t.add({sigma, ang.plus, ang.minus, rp, rm});
      return t;
    }
    if (na < 1) throw CLI::ValidationError("--na", "must be positive");
    t.columns = {"sign", "a", "x", "y", "z"};
    for (int sign : {+1, -1})
      for (double av : linspace(a_min, a_max, na)) {
        const Vec3 q = nil::cut_locus_curve(sigma, sign, av);
        t.add({(long long)sign, av, q.x(), q.y(), q.z()});
      }
    return t;
  }
};

struct SphereCmd {
  double sigma = 0, r = 1;
  int na = 64, ntheta = 128;

  Table run() const {
    Table t;
    t.columns = {"a", "theta", "t", "x", "y", "z"};
    for (const auto& p : ars::nilpotent::sphere_sample(sigma, r, na, ntheta))
      t.add({p.a, p.theta, p.t, p.q.x(), p.q.y(), p.q.z()});
    return t;
  }
};

struct AbnormalFieldCmd {
  FrameSource frame;
  std::string point;
  double tol = 1e-9;

  Table run() const {
    const auto f = frame.load();
    const Vec3 q = parse_point(point, "--point");
    const auto u = ars::abnormal_controls(f, q, tol);
    const Vec3 X = ars::abnormal_field(f, q, tol);
    Table t;
    t.columns = {"x", "y", "z", "u1", "u2", "u3", "fx", "fy", "fz"};
    t.add({q.x(), q.y(), q.z(), u.u1, u.u2, u.u3, X.x(), X.y(), X.z()});
    return t;
  }
};

struct AbnormalTraceCmd {
  FrameSource frame;
  std::string from;
  double T = 1, h = 1e-3;
  ars::AbnormalTraceOptions opts;

  Table run() const {
    const auto f = frame.load();
    const auto tr = ars::trace_abnormal(f, parse_point(from, "--from"), T, h, opts);
    Table t;
    t.columns = {"t", "x", "y", "z", "u1", "u2", "u3"};
    for (const auto& s : tr) t.add({s.t, s.q.x(), s.q.y(), s.q.z(), s.u.u1, s.u.u2, s.u.u3});
    return t;
  }
};

struct LinearizeCmd {
  FrameSource frame;
  double tol = 1e-9;

  Table run() const {
    const auto r = ars::type2_linearization(frame.load(), tol);
    Table t;
    t.columns = {"phi_xx", "phi_yy", "beta_x", "m11", "m12", "m21", "m22", "eig1_re", "eig1_im",
                 "eig2_re", "eig2_im", "stability", "origin_class", "nondegenerate"};
    t.add({r.phi_xx, r.phi_yy, r.beta_x, r.matrix(0, 0), r.matrix(0, 1), r.matrix(1, 0), r.matrix(1, 1),
           r.eigenvalues[0].real(), r.eigenvalues[0].imag(), r.eigenvalues[1].real(), r.eigenvalues[1].imag(),
           std::string(ars::to_string(r.stability)), std::string(ars::to_string(r.origin_class)),
           r.nondegenerate});
    if (!r.nondegenerate) std::cerr << "warning: d/dx beta vanishes at the origin (u1(0) = 0)\n";
    return t;
  }
};

struct QuadFlags {
  ars::heat::QuadConfig cfg;
  void attach(CLI::App* app) {
    app->add_option("--nu-cutoff", cfg.nu_cutoff, "frequency cutoff; 0 picks it from the integrand envelope")
        ->capture_default_str();
    app->add_option("--abs-tol", cfg.abs_tol, "absolute quadrature tolerance")->capture_default_str();
    app->add_option("--rel-tol", cfg.rel_tol, "relative quadrature tolerance")->capture_default_str();
    app->add_option("--max-subdivisions", cfg.max_subdivisions, "panel budget")->capture_default_str();
  }
};

struct HeatKernelCmd {
  double sigma = 0;
  std::vector<double> times{1.0};
  std::string source = "0,0,0", target = "0,0,0";
  QuadFlags quad;

  Table run() const {
    const Vec3 q = parse_point(source, "--source"), qb = parse_point(target, "--target");
    Table t;
    t.columns = {"sigma", "t", "x", "y", "z", "xb", "yb", "zb", "K", "err_est"};
    for (double tt : times) {
      const auto k = ars::heat::kernel(sigma, tt, q, qb, quad.cfg);
      t.add({sigma, tt, q.x(), q.y(), q.z(), qb.x(), qb.y(), qb.z(), k.value, k.error});
    }
    return t;
  }
};

struct PdeCheckCmd {
  double sigma = 0, t = 0.5, h_space = 1e-2, h_time = 1e-2;
  std::string source = "0.3,0.2,0.1", target = "0,0,0";
  QuadFlags quad;

  Table run() const {
    const Vec3 q = parse_point(source, "--source"), qb = parse_point(target, "--target");
    Table out;
    out.columns = {"sigma", "t", "x", "y", "z", "xb", "yb", "zb", "h_space", "h_time", "residual"};
    out.add({sigma, t, q.x(), q.y(), q.z(), qb.x(), qb.y(), qb.z(), h_space, h_time,
             ars::heat::pde_residual(sigma, t, q, qb, h_space, h_time, quad.cfg)});
    return out;
  }
};

struct LeandreCmd {
  double sigma = 1, t0 = 0.02;
  int levels = 3;
  std::string source = "0,0,0", target = "0.5,0,0";
  std::optional<double> distance;
  QuadFlags quad;

  Table run() const {
    const Vec3 q = parse_point(source, "--source"), qb = parse_point(target, "--target");
    const auto tab = ars::heat::leandre_table(sigma, q, qb, t0, levels, quad.cfg);
    Table t;
    t.columns = {"kind", "t", "estimate", "richardson1"};
    for (std::size_t i = 0; i < tab.times.size(); ++i)
      t.add({std::string("raw"), tab.times[i], tab.estimates[i], i == 0 ? NAN : tab.first[i - 1]});
    t.add({std::string("extrapolated"), 0.0, tab.extrapolated, NAN});
    const double d = distance ? *distance : ars::shoot_distance(ars::nilpotent_frame(sigma), q, qb).distance;
    const double rd = std::abs(tab.extrapolated - d) / d, rd2 = std::abs(tab.extrapolated - d * d) / (d * d);
    t.meta["distance"] = d;
    t.meta["relative_gap_to_d"] = rd;
    t.meta["relative_gap_to_d2"] = rd2;
    t.meta["closest_target"] = rd2 < rd ? "d^2" : "d";
    std::cerr << "extrapolated " << format_double(tab.extrapolated) << "; d = " << format_double(d)
              << " (gap " << rd << "), d^2 = " << format_double(d * d) << " (gap " << rd2 << ")\n";
    return t;
  }
};

struct BarrierCmd {
  double sigma = 1, mu = 0, nu = 1;
  ars::BarrierGrid grid;
  ars::BarrierInit init;
  std::string side = "right";
  bool no_barrier_term = false;

  Table run() const {
    auto in = init;
    in.right = side == "right";
    const auto series = ars::barrier_simulation(sigma, mu, nu, grid, in, !no_barrier_term);
    Table t;
    t.columns = {"t", "mass_left", "mass_right"};
    for (const auto& s : series) t.add({s.t, s.mass_left, s.mass_right});
    return t;
  }
};

struct ValidateCmd {
  FrameSource frame;
  std::string kind;

  Table run() const {
    const auto f = frame.load();
    ars::FrameKind k;
    if (kind.empty()) {
      if (!f.declared_kind()) throw CLI::ValidationError("--kind", "frame declares no kind; pass --kind");
      k = *f.declared_kind();
    } else {
      k = kind == "type1" ? ars::FrameKind::Type1 : kind == "type2" ? ars::FrameKind::Type2 : ars::FrameKind::Riemannian;
    }
    const auto rep = ars::validate_normal_form(f, k);
    Table t;
    t.columns = {"check", "value", "threshold", "nonzero", "passed"};
    for (const auto& c : rep.checks) t.add({c.name, c.value, c.threshold, c.nonzero, c.passed});
    t.meta["kind"] = ars::to_string(k);
    t.meta["passed"] = rep.passed();
    std::cerr << "normal form " << ars::to_string(k) << ": " << (rep.passed() ? "passed" : "FAILED") << "\n";
    return t;
  }
};

// ---------------------------------------------------------------- driver

json versions() {
  return {{"arsgeo", kVersion},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"cli11", CLI11_VERSION},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
          {"compiler", __VERSION__}};
}

json parameters_of(const CLI::App* app) {
  json p = json::object();
  for (const CLI::Option* o : app->get_options()) {
    if (o->count() == 0 || o->get_name() == "--help") continue;
    const auto& res = o->results();
    if (res.empty()) p[o->get_name()] = true;
    else if (res.size() == 1) p[o->get_name()] = res.front();
    else p[o->get_name()] = res;
  }
  return p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerics for three-dimensional almost-Riemannian structures"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string("arsgeo ") + kVersion);

  std::string format = "csv", output, manifest;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--format", format, "output format")->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
    sub->add_option("-o,--output", output, "output file (default: stdout)");
    sub->add_option("--manifest", manifest, "run manifest path (default: <output>.manifest.json)");
  };

  std::map<CLI::App*, std::function<Table()>> actions;
  auto leaf = [&](CLI::App* parent, const char* name, const char* help, auto& cmd) {
    CLI::App* sub = parent->add_subcommand(name, help);
    common(sub);
    actions[sub] = [&cmd] { return cmd.run(); };
    return sub;
  };

  ClassifyCmd classify;
  {
    auto* s = leaf(&app, "classify", "classify points (Riemannian, type1, type2, degenerate)", classify);
    classify.frame.attach(s);
    s->add_option("--point", classify.points, "point x,y,z (repeatable; use --point=-1,0,0 for negatives)");
    s->add_option("--singular-sample", classify.sample, "nx,ny,nz: sample the singular set in the frame box");
    s->add_option("--tol", classify.tol, "rank and tangency tolerance")->capture_default_str();
  }
  GeodesicCmd geodesic;
  {
    auto* s = leaf(&app, "geodesic", "integrate the Hamiltonian flow (or the nilpotent closed form)", geodesic);
    geodesic.frame.attach(s);
    s->add_option("--from", geodesic.from, "start point")->capture_default_str();
    s->add_option("--covector", geodesic.covector, "initial covector px,py,pz (overrides --theta/--a)");
    s->add_option("--theta", geodesic.theta, "covector angle")->capture_default_str();
    s->add_option("--a", geodesic.a, "covector z component")->capture_default_str();
    s->add_option("--T", geodesic.T, "final time")->capture_default_str();
    s->add_option("--step", geodesic.h, "RK4 step")->capture_default_str();
    s->add_option("--stride", geodesic.stride, "keep every n-th step")->capture_default_str();
    s->add_flag("--closed-form", geodesic.closed_form, "nilpotent closed form (needs --sigma)");
  }
  ExpMapCmd expmap;
  {
    auto* s = leaf(&app, "exp-map", "endpoint of the geodesic with covector (cos theta, sin theta, a)", expmap);
    expmap.frame.attach(s);
    s->add_option("--from", expmap.from, "start point")->capture_default_str();
    s->add_option("--theta", expmap.theta)->capture_default_str();
    s->add_option("--a", expmap.a)->capture_default_str();
    s->add_option("--t", expmap.t)->capture_default_str();
    s->add_option("--step", expmap.h, "RK4 step")->capture_default_str();
  }
  DistanceCmd distance;
  {
    auto* s = leaf(&app, "distance", "distance by multi-start shooting", distance);
    distance.frame.attach(s);
    s->add_option("--from", distance.from)->capture_default_str();
    s->add_option("--to", distance.to)->required();
    s->add_option("--theta-seeds", distance.opts.theta_seeds)->capture_default_str();
    s->add_option("--step", distance.opts.h, "final RK4 step")->capture_default_str();
    s->add_option("--coarse-step", distance.opts.coarse_h, "seed-search RK4 step")->capture_default_str();
    s->add_option("--tol", distance.opts.tol, "endpoint residual")->capture_default_str();
    s->add_option("--max-iterations", distance.opts.max_iterations)->capture_default_str();
  }
  ConjugateCmd conjugate;
  {
    auto* s = leaf(&app, "conjugate", "first conjugate time, or the conjugate locus on an (a, theta) grid", conjugate);
    s->add_option("--sigma", conjugate.sigma)->required();
    s->add_option("--a", conjugate.a);
    s->add_option("--theta", conjugate.theta);
    s->add_option("--na", conjugate.na)->capture_default_str();
    s->add_option("--ntheta", conjugate.ntheta)->capture_default_str();
    s->add_option("--a-min", conjugate.a_min)->capture_default_str();
    s->add_option("--a-max", conjugate.a_max)->capture_default_str();
    s->add_option("--scan", conjugate.scan, "scan nodes before bisection")->capture_default_str();
  }
  CutCmd cut;
  {
    auto* s = leaf(&app, "cut", "cut time, angles, boundary curves or membership", cut);
    s->add_option("--sigma", cut.sigma)->required();
    s->add_option("--point", cut.point, "membership query x,y,z");
    s->add_option("--a", cut.a);
    s->add_option("--theta", cut.theta);
    s->add_flag("--angles", cut.angles, "report the two cut half-plane angles");
    s->add_option("--na", cut.na, "samples per boundary curve")->capture_default_str();
    s->add_option("--a-min", cut.a_min)->capture_default_str();
    s->add_option("--a-max", cut.a_max)->capture_default_str();
    s->add_option("--tol", cut.tol, "membership tolerance")->capture_default_str();
  }
  SphereCmd sphere;
  {
    auto* s = leaf(&app, "sphere", "points of the sphere of radius r", sphere);
    s->add_option("--sigma", sphere.sigma)->required();
    s->add_option("--r", sphere.r)->capture_default_str();
    s->add_option("--na", sphere.na)->capture_default_str();
    s->add_option("--ntheta", sphere.ntheta)->capture_default_str();
  }

  CLI::App* abnormal = app.add_subcommand("abnormal", "abnormal extremals");
  abnormal->require_subcommand(1);
  AbnormalFieldCmd afield;
  {
    auto* s = leaf(abnormal, "field", "abnormal direction field at a singular point", afield);
    afield.frame.attach(s);
    s->add_option("--point", afield.point)->required();
    s->add_option("--tol", afield.tol, "singular-set tolerance")->capture_default_str();
  }
  AbnormalTraceCmd atrace;
  {
    auto* s = leaf(abnormal, "trace", "trace an abnormal curve inside the singular set", atrace);
    atrace.frame.attach(s);
    s->add_option("--from", atrace.from)->required();
    s->add_option("--T", atrace.T)->capture_default_str();
    s->add_option("--step", atrace.h, "RK4 step")->capture_default_str();
    s->add_option("--stride", atrace.opts.stride)->capture_default_str();
    s->add_option("--tol", atrace.opts.tol, "singular-set tolerance of the start point")->capture_default_str();
    s->add_option("--pole-threshold", atrace.opts.pole_threshold)->capture_default_str();
    s->add_flag("--normalized", atrace.opts.normalized, "follow the unit field");
  }
  LinearizeCmd linearize;
  {
    auto* s = leaf(abnormal, "linearize", "linearized abnormal field at a type-2 origin", linearize);
    linearize.frame.attach(s);
    s->add_option("--tol", linearize.tol)->capture_default_str();
  }

  CLI::App* heat = app.add_subcommand("heat", "heat kernel of the nilpotent family");
  heat->require_subcommand(1);
  HeatKernelCmd hkernel;
  {
    auto* s = leaf(heat, "kernel", "K_t(source, target) by quadrature", hkernel);
    s->add_option("--sigma", hkernel.sigma)->required();
    s->add_option("--t", hkernel.times, "diffusion time(s)")->delimiter(',')->capture_default_str();
    s->add_option("--source", hkernel.source)->capture_default_str();
    s->add_option("--target", hkernel.target)->capture_default_str();
    hkernel.quad.attach(s);
  }
  PdeCheckCmd pde;
  {
    auto* s = leaf(heat, "pde-check", "finite-difference heat-equation residual", pde);
    s->add_option("--sigma", pde.sigma)->required();
    s->add_option("--t", pde.t)->capture_default_str();
    s->add_option("--source", pde.source)->capture_default_str();
    s->add_option("--target", pde.target)->capture_default_str();
    s->add_option("--h-space", pde.h_space)->capture_default_str();
    s->add_option("--h-time", pde.h_time)->capture_default_str();
    pde.quad.attach(s);
  }
  LeandreCmd leandre;
  {
    auto* s = leaf(heat, "leandre", "-4 t log K_t on dyadic times with extrapolation", leandre);
    s->add_option("--sigma", leandre.sigma)->capture_default_str();
    s->add_option("--source", leandre.source)->capture_default_str();
    s->add_option("--target", leandre.target)->capture_default_str();
    s->add_option("--t0", leandre.t0)->capture_default_str();
    s->add_option("--levels", leandre.levels)->capture_default_str();
    s->add_option("--distance", leandre.distance, "known distance (default: computed by shooting)");
    leandre.quad.attach(s);
  }
  BarrierCmd barrier;
  {
    auto* s = leaf(heat, "barrier", "reduced one-dimensional operator, half-line masses", barrier);
    s->add_option("--sigma", barrier.sigma)->capture_default_str();
    s->add_option("--mu", barrier.mu)->capture_default_str();
    s->add_option("--nu", barrier.nu)->capture_default_str();
    s->add_option("--L", barrier.grid.L)->capture_default_str();
    s->add_option("--n", barrier.grid.n, "cells (even)")->capture_default_str();
    s->add_option("--dt", barrier.grid.dt)->capture_default_str();
    s->add_option("--T", barrier.grid.T)->capture_default_str();
    s->add_option("--output-every", barrier.grid.output_every)->capture_default_str();
    s->add_option("--side", barrier.side, "side of the initial bump")
        ->check(CLI::IsMember({"left", "right"}))
        ->capture_default_str();
    s->add_option("--center", barrier.init.center)->capture_default_str();
    s->add_option("--width", barrier.init.width)->capture_default_str();
    s->add_flag("--no-barrier-term", barrier.no_barrier_term, "drop the 3/(4x^2) term (control run)");
  }
  ValidateCmd validate;
  {
    auto* s = leaf(&app, "validate", "check a frame against its declared normal form", validate);
    validate.frame.attach(s);
    s->add_option("--kind", validate.kind, "normal form to check (default: declared kind)")
        ->check(CLI::IsMember({"riemannian", "type1", "type2"}));
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  CLI::App* active = nullptr;
  std::string command;
  for (CLI::App* a = &app; !a->get_subcommands().empty();) {
    a = a->get_subcommands().front();
    command += (command.empty() ? "" : " ") + a->get_name();
    active = a;
  }

  const auto start = std::chrono::steady_clock::now();
  Table table;
  try {
    table = actions.at(active)();
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ars::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ars::PreconditionError& e) {
    std::cerr << "precondition violated: " << e.what() << "\n";
    return 2;
  } catch (const ars::Error& e) {
    std::cerr << "computation failed: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "computation failed: " << e.what() << "\n";
    return 1;
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  if (output.empty()) {
    write_table(std::cout, table, format, command);
  } else {
    std::ofstream out(output);
    if (!out) {
      std::cerr << "error: cannot write '" << output << "'\n";
      return 2;
    }
    write_table(out, table, format, command);
  }
  const std::string mpath = !manifest.empty() ? manifest : output.empty() ? "" : output + ".manifest.json";
  if (!mpath.empty()) {
    json m = {{"command", command},
              {"parameters", parameters_of(active)},
              {"versions", versions()},
              {"wall_time_seconds", wall},
              {"rows", table.rows.size()}};
    if (!table.meta.empty()) m["results"] = table.meta;
    std::ofstream mo(mpath);
    if (!mo) {
      std::cerr << "error: cannot write '" << mpath << "'\n";
      return 2;
    }
    mo << m.dump(2) << "\n";
  }
  return 0;
}
