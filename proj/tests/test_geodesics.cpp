#include <cmath>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "arsgeo/geodesics.hpp"
#include "arsgeo/nilpotent.hpp"

using namespace ars;

namespace {

constexpr double kPi = std::numbers::pi;

const Frame& euclidean() {
  static const Frame f = parse_frame_spec("alpha=1; beta=0; nu=1");
  return f;
}

}  // namespace

TEST(Hamiltonian, Examples) {
  EXPECT_DOUBLE_EQ(hamiltonian(euclidean(), {Vec3::Zero(), Vec3(1, 0, 0)}), 0.5);
  for (double sigma : {0.0, 0.7, kPi / 2}) {
    const double x = 0.8, a = -1.3;
    EXPECT_NEAR(hamiltonian(nilpotent_frame(sigma), {Vec3(x, 2, 3), Vec3(0, 0, a)}),
                0.5 * a * a * x * x, 1e-15);
  }
  // on the singular set only X1 and X2 contribute
  const Frame f = parse_frame_spec("alpha=1+y; beta=x+z; nu=x*(2+z)");
  const Vec3 q(0, 0.5, 0.25);
  const Vec3 p(0.3, -0.7, 1.1);
  const double u2 = 1.5 * p.y() + 0.25 * p.z();
  EXPECT_NEAR(hamiltonian(f, {q, p}), 0.5 * (p.x() * p.x() + u2 * u2), 1e-15);
}

TEST(Integrate, EuclideanStraightLine) {
  const auto path = integrate_geodesic(euclidean(), {Vec3::Zero(), Vec3(1, 0, 0)}, 1.0);
  EXPECT_LE((path.samples.back().state.q - Vec3(1, 0, 0)).norm(), 1e-12);
  EXPECT_LE(path.hamiltonian_drift, 1e-12);
  EXPECT_DOUBLE_EQ(path.samples.back().t, 1.0);
  for (std::size_t i = 1; i < path.samples.size(); ++i)
    EXPECT_GT(path.samples[i].t, path.samples[i - 1].t);
}

TEST(Integrate, NilpotentEndpoints) {
  const auto e0 = exponential_map(nilpotent_frame(0.0), Vec3::Zero(), CovectorInit{0.0, 1.0}, kPi);
  EXPECT_LE((e0 - Vec3(0, 2, kPi / 2)).norm(), 1e-9);
  const auto e1 = exponential_map(nilpotent_frame(kPi / 2), Vec3::Zero(), CovectorInit{kPi / 2, 1.0}, 2.0);
  EXPECT_LE((e1 - Vec3(0, 2, 0)).norm(), 1e-9);
  const auto path = integrate_geodesic(nilpotent_frame(kPi / 2), {Vec3::Zero(), Vec3(0, 1, 1)}, 2.0);
  for (const auto& s : path.samples) EXPECT_LE(std::abs(s.state.q.x()), 1e-12);
}

TEST(ExponentialMap, Examples) {
  for (double sigma : {0.0, 0.6, kPi / 2})
    for (double th : {0.0, 1.0, 2.5}) {
      const double t = 1.7;
      const Vec3 e = exponential_map(nilpotent_frame(sigma), Vec3::Zero(), CovectorInit{th, 0.0}, t);
      const Vec3 want(t * std::cos(th), t * std::sin(th), 0.25 * t * t * std::cos(sigma) * std::sin(2 * th));
      EXPECT_LE((e - want).norm(), 1e-10);
    }
  EXPECT_LE((exponential_map(euclidean(), Vec3::Zero(), CovectorInit{kPi / 2, 0.0}, 3.0) - Vec3(0, 3, 0)).norm(), 1e-12);
  const Vec3 e = exponential_map(nilpotent_frame(1.0), Vec3::Zero(), CovectorInit{0.3, 0.7}, 1.5);
  EXPECT_LE((e - nilpotent::geodesic_closed_form(1.0, {0.3, 0.7}, 1.5)).norm(), 1e-7);
  // not arclength-normalized
  EXPECT_THROW(exponential_map(euclidean(), Vec3::Zero(), Vec3(1, 1, 0), 1.0), PreconditionError);
}

TEST(Integrate, ErrorsAndBox) {
  EXPECT_THROW(integrate_geodesic(euclidean(), {}, 0.0), PreconditionError);
  EXPECT_THROW(integrate_geodesic(euclidean(), {}, 1.0, -1e-3), PreconditionError);
  const Frame boxed = parse_frame_spec("alpha=1; beta=0; nu=1; box=-1,1,-1,1,-1,1");
  EXPECT_THROW(integrate_geodesic(boxed, {Vec3::Zero(), Vec3(1, 0, 0)}, 2.0), EvalError);
  const Frame pole = parse_frame_spec("alpha=1; beta=0; nu=1/(x-0.5)");
  EXPECT_THROW(integrate_geodesic(pole, {Vec3::Zero(), Vec3(1, 0, 0)}, 1.0, 0.25), EvalError);
}

// Properties: Hamiltonian conservation, arclength, closed-form agreement, time reversal.
TEST(Integrate, Invariants) {
  const Frame general = parse_frame_spec("alpha=1+0.2*sin(y); beta=x*cos(0.4)+0.1*z; nu=x*sin(0.4)*(1+0.1*y^2)");
  const PhaseState s0{Vec3(0.1, 0.2, -0.1), Vec3(0.6, -0.5, 0.9)};
  const auto path = integrate_geodesic(general, s0, 10.0);
  EXPECT_LE(path.hamiltonian_drift, 1e-8);

  const Frame nil = nilpotent_frame(0.9);
  const auto unit = integrate_geodesic(nil, {Vec3::Zero(), CovectorInit{1.1, 1.4}.covector()}, 3.0);
  EXPECT_LE(std::abs(path_length(nil, unit) - 3.0), 1e-8);

  const PhaseState end = unit.samples.back().state;
  const auto back = integrate_geodesic(nil, {end.q, -end.p}, 3.0);
  EXPECT_LE((back.samples.back().state.q - Vec3::Zero()).norm(), 1e-7);
}

TEST(Integrate, ClosedFormAgreementGrid) {
  double worst = 0;
  for (double sigma : {0.0, 0.5, 1.0, kPi / 2})
    for (double a : {0.3, -0.3, 1.0, -1.0, 2.5, -2.5})
      for (int k = 0; k < 8; ++k) {
        const double th = 2 * kPi * k / 8;
        const double T = std::min(3.0, 2 * kPi / std::abs(a));
        const auto path = integrate_geodesic(nilpotent_frame(sigma), {Vec3::Zero(), CovectorInit{th, a}.covector()}, T, 1e-3, 100);
        for (const auto& s : path.samples)
          worst = std::max(worst, (s.state.q - nilpotent::geodesic_closed_form(sigma, {th, a}, s.t)).cwiseAbs().maxCoeff());
      }
  EXPECT_LE(worst, 1e-7);
}

TEST(Shoot, Examples) {
  ShootOptions o;
  o.theta_seeds = 8;
  const auto heis = shoot_distance(nilpotent_frame(0.0), Vec3::Zero(), Vec3(0, 0, kPi), o);
  EXPECT_NEAR(heis.distance, 2 * kPi, 1e-6);
  EXPECT_NEAR(std::abs(heis.init.a), 1.0, 1e-6);
  EXPECT_LE(heis.residual, 1e-8);

  const auto same = shoot_distance(euclidean(), Vec3(1, 2, 3), Vec3(1, 2, 3));
  EXPECT_EQ(same.distance, 0.0);

  for (double r : {0.1, 1.0, 2.0}) {
    const auto s = shoot_distance(nilpotent_frame(0.6), Vec3::Zero(), Vec3(r, 0, 0), o);
    EXPECT_NEAR(s.distance, r, 1e-8);
    EXPECT_NEAR(std::remainder(s.init.theta, 2 * kPi), 0.0, 1e-6);
    EXPECT_NEAR(s.init.a, 0.0, 1e-6);
  }
  const auto euc = shoot_distance(euclidean(), Vec3::Zero(), Vec3(1, 2, 2), o);
  EXPECT_NEAR(euc.distance, 3.0, 1e-8);
}

// A coarse-step artefact (tiny t, huge a) must not hide the genuine minimizer.
TEST(Shoot, SphereEndpointsBehindCoarseArtefacts) {
  ShootOptions o;
  o.theta_seeds = 8;
  for (const auto& p : nilpotent::sphere_sample(0.5, 1.0, 5, 8)) {
    if (std::abs(p.a) < 2.0) continue;
    const auto s = shoot_distance(nilpotent_frame(0.5), Vec3::Zero(), p.q, o);
    EXPECT_LE(s.distance, 1.0 + 1e-6);
    EXPECT_LE(s.residual, 1e-8);
  }
}

TEST(Shoot, ReportsFailure) {
  ShootOptions o;
  o.theta_seeds = 2;
  o.a_seeds = {0.0};
  o.max_iterations = 1;
  try {
    shoot_distance(nilpotent_frame(0.0), Vec3::Zero(), Vec3(0, 0, 1), o);
    FAIL();
  } catch (const ConvergenceError& e) {
    EXPECT_GT(e.best_residual(), 1e-8);
  }
}

TEST(GeodesicCsv, HeaderAndPrecision) {
  const auto path = integrate_geodesic(euclidean(), {Vec3::Zero(), Vec3(1.0 / 3, 0, 0)}, 0.002);
  std::ostringstream os;
  write_csv(os, path);
  const std::string s = os.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "t,x,y,z,px,py,pz");
  EXPECT_NE(s.find("0.33333333333333331"), std::string::npos);
}
