#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "arsgeo/heat.hpp"

using namespace ars;
using namespace ars::heat;

namespace {


double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

struct Query {
  double t;
  Vec3 q, qb;
};

std::vector<Query> random_queries(int n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1), ut(0.3, 2.0);
  std::vector<Query> out;
  for (int i = 0; i < n; ++i) out.push_back({ut(rng), Vec3(u(rng), u(rng), u(rng)), Vec3(u(rng), u(rng), u(rng))});
  return out;
}

// Gauss-Hermite nodes and weights for exp(-x^2) by the Golub-Welsch eigenproblem.
std::pair<Eigen::VectorXd, Eigen::VectorXd> gauss_hermite(int n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  const Eigen::VectorXd w = std::sqrt(kPi) * es.eigenvectors().row(0).transpose().array().square();
  return {es.eigenvalues(), w};
}

}  // namespace

TEST(Auxiliaries, Examples) {
  for (double nu : {-2.0, 0.0, 0.5, 3.0}) {
    const auto a = kernel_auxiliaries(kPi / 2, nu, 0.7);
    EXPECT_NEAR(a.F, -0.7, 1e-15);
    EXPECT_NEAR(a.G, 0.0, 1e-16);
  }
  const auto b = kernel_auxiliaries(0.0, 1.0, 1.0);
  EXPECT_NEAR(b.F, -std::tanh(1.0), 1e-15);
  EXPECT_NEAR(b.G, -std::tanh(1.0), 1e-15);
  for (double sigma : {0.0, 0.6, 1.2}) {
    EXPECT_NEAR(kernel_auxiliaries(sigma, 1e-8, 0.9).F, -0.9, 1e-10);
    EXPECT_NEAR(kernel_auxiliaries(sigma, 0.0, 0.9).F, -0.9, 1e-15);
    for (double nu : {-5.0, -0.1, 0.1, 5.0}) EXPECT_LT(kernel_auxiliaries(sigma, nu, 0.9).F, 0.0);
  }
  EXPECT_THROW(kernel_auxiliaries(0.3, 1.0, 0.0), PreconditionError);
}

TEST(Integrand, DiagonalHeisenbergShape) {
  for (double nu : {0.0, 1e-9, 0.3, 2.0, -4.0}) {
    const double t = 0.8;
    const double shape = nu == 0 ? 1 / (2 * t) : nu / (2 * std::sinh(nu * t));
    EXPECT_NEAR(integrand_I(0.0, t, Vec3::Zero(), Vec3::Zero(), nu), shape / (4 * kPi * kPi), 1e-15);
  }
}

TEST(Integrand, SymmetryAndParity) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int i = 0; i < 100; ++i) {
    const double sigma = (u(rng) + 1) * kPi / 4, t = 0.2 + std::abs(u(rng)), nu = 4 * u(rng);
    const Vec3 q(u(rng), u(rng), u(rng)), qb(u(rng), u(rng), u(rng));
    const double a = integrand_I(sigma, t, q, qb, nu), b = integrand_I(sigma, t, qb, q, nu);
    EXPECT_LE(std::abs(a - b), 1e-13 * std::max(std::abs(a), 1e-3));
    EXPECT_NEAR(integrand_I(sigma, t, q, qb, nu), integrand_I(sigma, t, q, qb, -nu), 1e-15);
    const Vec3 same_yz(qb.x(), q.y(), q.z());
    EXPECT_EQ(integrand_I(sigma, t, q, same_yz, nu), integrand_I(sigma, t, q, same_yz, -nu));
  }
  EXPECT_EQ(integrand_I(0.5, 1.0, Vec3(1, 0, 0), Vec3::Zero(), 400.0), 0.0);
}

TEST(Kernel, HeisenbergDiagonal) {
  EXPECT_NEAR(kernel(0.0, 1.0, Vec3::Zero(), Vec3::Zero()).value, 1.0 / 16, 1e-12);
  for (double t : {0.5, 1.0, 2.0}) {
    EXPECT_LE(rel(kernel(0.0, t, Vec3::Zero(), Vec3::Zero()).value, 1 / (16 * t * t)), 1e-6);
    EXPECT_LE(rel(kernel_heisenberg(t, Vec3::Zero(), Vec3::Zero()).value, 1 / (16 * t * t)), 1e-6);
  }
  // int_0^inf u / sinh u du = pi^2 / 4 by a truncated substitution-free quadrature
  const auto r = integrate([](double u) { return u == 0 ? 1.0 : u / std::sinh(u); }, {0.0, 5.0, 20.0, 60.0},
                           {1e-15, 1e-14});
  EXPECT_NEAR(r.value, kPi * kPi / 4, 1e-12);
}

TEST(Kernel, CollapsesToHeisenbergAndBaouendiGoulaouic) {
  for (const auto& c : random_queries(30, 7)) {
    const double h = kernel_heisenberg(c.t, c.q, c.qb).value;
    EXPECT_LE(rel(kernel(0.0, c.t, c.q, c.qb).value, h), 1e-8);
    const double b = kernel_baouendi_goulaouic(c.t, c.q, c.qb).value;
    EXPECT_LE(rel(kernel(kPi / 2, c.t, c.q, c.qb).value, b), 1e-8);
  }
}

TEST(Kernel, SpecialCaseInvariances) {
  for (const auto& c : random_queries(20, 11)) {
    const Vec3 shift(0, 0.7, -1.3);
    const double h = kernel_heisenberg(c.t, c.q, c.qb).value;
    EXPECT_LE(rel(kernel_heisenberg(c.t, c.q + shift, c.qb + shift).value, h), 1e-12);
    // Gaussian factor in y - yb
    const double b0 = kernel_baouendi_goulaouic(c.t, c.q, Vec3(c.qb.x(), c.q.y(), c.qb.z())).value;
    for (double d : {0.4, 1.1}) {
      const double bd = kernel_baouendi_goulaouic(c.t, c.q, Vec3(c.qb.x(), c.q.y() + d, c.qb.z())).value;
      EXPECT_LE(rel(bd / b0, std::exp(-d * d / (4 * c.t))), 1e-10);
    }
    const Vec3 flipped(c.qb.x(), c.qb.y(), 2 * c.q.z() - c.qb.z());
    EXPECT_LE(rel(kernel_baouendi_goulaouic(c.t, c.q, flipped).value,
                  kernel_baouendi_goulaouic(c.t, c.q, c.qb).value),
              1e-12);
  }
}

// Property: symmetric in the two points and positive.
TEST(Kernel, SymmetryAndPositivity) {
  std::mt19937 rng(19);
  std::uniform_real_distribution<double> us(0, kPi / 2);
  for (const auto& c : random_queries(100, 13)) {
    const double sigma = us(rng);
    const double a = kernel(sigma, c.t, c.q, c.qb).value, b = kernel(sigma, c.t, c.qb, c.q).value;
    EXPECT_GT(a, 0.0);
    EXPECT_GT(b, 0.0);
    EXPECT_LE(std::abs(a - b), 1e-9 * a);
  }
  // far apart at small t: the value sits near the cancellation floor
  const Vec3 q(-0.194626, 0.544747, -0.952056), qb(0.233103, 0.978727, 0.827159);
  const auto far = kernel(0.49516, 0.310376, q, qb), back = kernel(0.49516, 0.310376, qb, q);
  EXPECT_GT(far.value, 0.0);
  EXPECT_LE(std::abs(far.value - back.value), far.error + back.error + 1e-9 * far.value);
  EXPECT_THROW(kernel(0.3, 0.0, Vec3::Zero(), Vec3::Zero()), PreconditionError);
  EXPECT_THROW(kernel(2.0, 1.0, Vec3::Zero(), Vec3::Zero()), PreconditionError);
}

// The complex-exponential form of the integrand has an odd imaginary part.
TEST(Kernel, ComplexFormImaginaryPartVanishes) {
  for (const auto& c : random_queries(10, 17)) {
    const double sigma = 0.9;
    // amplitude times sin(phase); nu = 0 is never a Kronrod node here
    auto imag = [&](double nu) {
      const auto [F, G] = kernel_auxiliaries(sigma, nu, c.t);
      const double x = c.q.x(), xb = c.qb.x(), dy = c.q.y() - c.qb.y();
      const double phase = nu * (c.q.z() - c.qb.z()) - (x + xb) * dy * G / (2 * F);
      const double s2 = std::sinh(2 * nu * c.t), t2 = std::tanh(2 * nu * c.t);
      const double expo = x * xb * (nu / s2 - G * G / (2 * F)) -
                          (x * x + xb * xb) * (nu / (2 * t2) + G * G / (4 * F)) + dy * dy / (4 * F);
      return std::sin(phase) * std::exp(expo) * std::sqrt(-nu / (2 * F * s2)) / (4 * kPi * kPi);
    };
    const double numax = 60 / c.t;
    std::vector<double> br;
    for (int i = -64; i <= 64; ++i) br.push_back(numax * i / 64);
    const auto im = integrate(imag, br, {1e-14, 1e-12});
    EXPECT_LE(std::abs(im.value), 1e-10 * kernel(sigma, c.t, c.q, c.qb).value);
  }
}

TEST(Mehler, Examples) {
  const double nu = 1.3, t = 0.4;
  EXPECT_NEAR(q_kernel(0, nu, 0.5, t, 0, 0), std::sqrt(nu / (2 * kPi * std::sinh(2 * nu * t))), 1e-15);
  EXPECT_EQ(q_kernel(0.4, nu, 0.5, t, 0.3, -1.1), q_kernel(0.4, nu, 0.5, t, -1.1, 0.3));
  const auto phi = hermite_functions(nu, 0.7, 0);
  EXPECT_NEAR(mehler_partial_sum(0.2, nu, 0.5, t, 0.7, -0.2, 0),
              std::exp(t * (-nu - 0.04 * std::pow(std::sin(0.5), 2))) * phi[0] *
                  hermite_functions(nu, -0.2, 0)[0],
              1e-15);
  EXPECT_NEAR(phi[0], std::pow(nu / kPi, 0.25) * std::exp(-nu * 0.49 / 2), 1e-15);
  EXPECT_THROW(q_kernel(0, 0, 0.5, t, 0, 0), PreconditionError);
}

// Absolute agreement on the whole box; relative agreement wherever the kernel
// is above the round-off floor of the alternating series.
TEST(Mehler, MatchesClosedForm) {
  for (double nut : {0.2, 0.5, 1.0, 2.0})
    for (double nu : {0.5, 1.0, 2.0})
      for (double g = -2; g <= 2; g += 0.25)
        for (double gb = -2; gb <= 2; gb += 0.25) {
          const double t = nut / nu;
          const double q = q_kernel(0.3, nu, 0.7, t, g, gb), m = mehler_partial_sum(0.3, nu, 0.7, t, g, gb, 80);
          EXPECT_LE(std::abs(q - m), 1e-8);
          if (q > 1e-6) EXPECT_LE(std::abs(q - m), 1e-8 * q) << nut << " " << nu << " " << g << " " << gb;
        }
}

TEST(Mehler, ErrorDecaysWithN) {
  const double nu = 1.0, t = 0.3, q = q_kernel(0.1, nu, 1.0, t, 0.5, -0.4);
  double prev = INFINITY;
  for (int N = 0; N <= 40; N += 4) {
    const double e = std::abs(mehler_partial_sum(0.1, nu, 1.0, t, 0.5, -0.4, N) - q);
    EXPECT_LE(e, prev * (1 + 1e-12) + 1e-16);
    prev = e;
  }
}

TEST(Mehler, Orthonormality) {
  const auto [x, w] = gauss_hermite(40);
  for (double nu : {1.0, 2.3}) {
    // phi_n(g) = nu^{1/4} psi_n(g sqrt(nu)); integrate psi_n psi_m e^{x^2} against e^{-x^2}
    Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(11, 11);
    for (int i = 0; i < x.size(); ++i) {
      const double g = x[i] / std::sqrt(nu);
      const auto phi = hermite_functions(nu, g, 10);
      for (int n = 0; n <= 10; ++n)
        for (int m = 0; m <= 10; ++m)
          gram(n, m) += w[i] * std::exp(x[i] * x[i]) * phi[n] * phi[m] / std::sqrt(nu);
    }
    EXPECT_LE((gram - Eigen::MatrixXd::Identity(11, 11)).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Pde, ResidualSmallAndSecondOrder) {
  EXPECT_LE(pde_residual(0.0, 0.5, Vec3(0.3, 0.2, 0.1), Vec3::Zero(), 1e-3, 1e-3), 1e-4);
  std::mt19937 rng(29);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 5; ++i) {
    const Vec3 q(u(rng), u(rng), u(rng)), qb(u(rng), u(rng), u(rng));
    const double r1 = pde_residual(1.0, 0.5, q, qb, 1e-2, 1e-2);
    EXPECT_LE(r1, 1e-3);
    const double r2 = pde_residual(1.0, 0.5, q, qb, 2e-2, 2e-2);
    EXPECT_NEAR(r2 / r1, 4.0, 0.8) << r1 << " " << r2;
  }
  EXPECT_THROW(pde_residual(1.0, 0.01, Vec3::Zero(), Vec3::Zero(), 1e-2, 1e-2), PreconditionError);
}

TEST(Leandre, TrendTowardsSquaredDistance) {
  const Vec3 o = Vec3::Zero(), qb(0.5, 0, 0);
  const auto tab = leandre_table(1.0, o, qb, 0.02);
  ASSERT_EQ(tab.times.size(), 3u);
  EXPECT_LT(tab.estimates[0], tab.estimates[1]);
  EXPECT_LT(tab.estimates[1], tab.estimates[2]);
  EXPECT_LE(std::abs(tab.extrapolated - 0.25) / 0.25, 0.15);
  EXPECT_GT(std::abs(tab.extrapolated - 0.5) / 0.5, 0.15);
  // with the t^{-3/2} prefactor removed the remainder is O(t) and one
  // Richardson step lands on d^2
  std::vector<double> corrected;
  for (std::size_t i = 0; i < 3; ++i) corrected.push_back(tab.estimates[i] - 6 * tab.times[i] * std::log(tab.times[i]));
  EXPECT_NEAR(2 * corrected[2] - corrected[1], 0.25, 0.01);
  // diagonal estimates shrink to 0
  double prev = INFINITY;
  for (double t : {0.02, 0.01, 0.005}) {
    const double e = std::abs(leandre_estimate(1.0, qb, qb, t));
    EXPECT_LT(e, prev);
    prev = e;
  }
  EXPECT_THROW(leandre_table(1.0, o, qb, 0.02, 2), PreconditionError);
}

// Chapman-Kolmogorov at sigma = 0 on a truncated trapezoid grid.
TEST(Kernel, SemigroupSpotCheck) {
  const double t = 1.0, s = 0.5, hxy = 0.25, hz = 0.25;
  const Vec3 o = Vec3::Zero(), qb(0.3, 0.2, 0.4);
  // far grid points carry kernels far below the values being summed
  QuadConfig cfg;
  cfg.abs_tol = 1e-13;
  double sum = 0;
  for (double x = -4; x <= 4 + 1e-9; x += hxy)
    for (double y = -4; y <= 4 + 1e-9; y += hxy)
      for (double z = -6; z <= 6 + 1e-9; z += hz) {
        const Vec3 m(x, y, z);
        sum += kernel_heisenberg(s, o, m, cfg).value * kernel_heisenberg(t - s, m, qb, cfg).value;
      }
  sum *= hxy * hxy * hz;
  EXPECT_LE(rel(sum, kernel_heisenberg(t, o, qb).value), 0.02);
}
