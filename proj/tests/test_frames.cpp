#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "arsgeo/frame.hpp"

using namespace ars;

namespace {

constexpr double kPi = std::numbers::pi;

const Frame& euclidean() {
  static const Frame f = parse_frame_spec("alpha=1; beta=0; nu=1; kind=riemannian");
  return f;
}
const Frame& baouendi_goulaouic() {
  static const Frame f = parse_frame_spec("alpha=1; beta=0; nu=x");
  return f;
}
const Frame& type2_example() {
  static const Frame f = parse_frame_spec("alpha=1; beta=x; nu=z+x^2+y^2");
  return f;
}

}  // namespace

TEST(FrameParse, Examples) {
  const Frame& e = euclidean();
  EXPECT_EQ(e.declared_kind(), FrameKind::Riemannian);
  EXPECT_DOUBLE_EQ(e.det(Vec3(1, 2, 3)), 1.0);
  const Frame& bg = baouendi_goulaouic();
  EXPECT_FALSE(bg.declared_kind().has_value());
  EXPECT_DOUBLE_EQ(bg.nu(Vec3(0.25, 7, 9)), 0.25);
  try {
    parse_frame_spec("alpha=1; beta=x*(");
    FAIL();
  } catch (const ParseError& err) {
    EXPECT_EQ(err.line(), 1u);
    EXPECT_EQ(err.column(), 17u);
  }
}

TEST(FrameParse, BoxKindAndErrors) {
  const Frame f = parse_frame_spec(" alpha = 1 ;\n beta = 0;\n nu = x; kind=type1; box=-1,1,-2,2,-3,3 ");
  EXPECT_EQ(f.declared_kind(), FrameKind::Type1);
  EXPECT_DOUBLE_EQ(f.box().lo.y(), -2.0);
  EXPECT_DOUBLE_EQ(f.box().hi.z(), 3.0);
  EXPECT_TRUE(f.box().contains(Vec3(1, 2, 3)));
  EXPECT_FALSE(f.box().contains(Vec3(1.5, 0, 0)));
  EXPECT_THROW(parse_frame_spec("alpha=1; beta=0"), ParseError);
  EXPECT_THROW(parse_frame_spec("alpha=1; beta=0; nu=1; gamma=2"), ParseError);
  EXPECT_THROW(parse_frame_spec("alpha=1; beta=0; nu=q"), ParseError);
  EXPECT_THROW(parse_frame_spec("alpha=1; beta=0; nu=x^0.5"), ParseError);
  EXPECT_THROW(parse_frame_spec("alpha=1; beta=0; nu=1; kind=type3"), ParseError);
  EXPECT_THROW(parse_frame_spec("alpha=1; beta=0; nu=1; box=1,2,3"), ParseError);
  EXPECT_THROW(parse_frame_spec("alpha=1; alpha=2; beta=0; nu=1"), ParseError);
  try {
    parse_frame_spec("alpha=1;\nbeta=0;\nnu=x+(y");
    FAIL();
  } catch (const ParseError& err) {
    EXPECT_EQ(err.line(), 3u);
    EXPECT_EQ(err.column(), 6u);
  }
}

TEST(Classify, DesignatedPoints) {
  EXPECT_EQ(classify_point(euclidean(), Vec3(0.3, -2, 5)).kind, PointClass::Riemannian);
  const auto bg = classify_point(baouendi_goulaouic(), Vec3::Zero());
  EXPECT_EQ(bg.kind, PointClass::Type1);
  EXPECT_EQ(bg.bracket_span_rank, 3);
  const auto t2 = classify_point(type2_example(), Vec3::Zero());
  EXPECT_EQ(t2.kind, PointClass::Type2);
  EXPECT_LE(t2.tangency_residual, 1e-9);
  EXPECT_EQ(t2.bracket_span_rank, 3);
  // off the pole the same frame's singular set is made of type-1 points
  EXPECT_EQ(classify_point(type2_example(), Vec3(0.5, 0, -0.25)).kind, PointClass::Type1);
}

TEST(Classify, DegenerateCases) {
  // nu = x^2: gradient of det vanishes on Z
  EXPECT_EQ(classify_point(parse_frame_spec("alpha=1; beta=0; nu=x^2"), Vec3::Zero()).kind,
            PointClass::Degenerate);
  // nu = 0 identically with beta = 0: no bracket generates the third direction
  EXPECT_EQ(classify_point(parse_frame_spec("alpha=1; beta=0; nu=0"), Vec3::Zero()).kind,
            PointClass::Degenerate);
  const Frame boxed = parse_frame_spec("alpha=1; beta=0; nu=x; box=-1,1,-1,1,-1,1");
  EXPECT_THROW(classify_point(boxed, Vec3(2, 0, 0)), PreconditionError);
}

// Property: enlarging tol never turns a type-2 point into a type-1 point.
TEST(Classify, ToleranceMonotone) {
  const Frame f = parse_frame_spec("alpha=1; beta=x; nu=z+x^2+y^2+0.3*x*y^2");
  std::mt19937 rng(3);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (int i = 0; i < 200; ++i) {
    const double x = u(rng) * 1e-6, y = u(rng) * 1e-6;
    const Vec3 q(x, y, -(x * x + y * y + 0.3 * x * y * y));
    bool was_type2 = false;
    for (double tol : {1e-12, 1e-10, 1e-9, 1e-8, 1e-6, 1e-4}) {
      const auto k = classify_point(f, q, tol).kind;
      if (was_type2) EXPECT_NE(k, PointClass::Type1);
      if (k == PointClass::Type2) was_type2 = true;
    }
  }
}

TEST(Metric, Examples) {
  EXPECT_TRUE(metric_tensor(euclidean(), Vec3(1, 1, 1)).isApprox(Mat3::Identity()));
  const Mat3 g = metric_tensor(baouendi_goulaouic(), Vec3(2, 0, 0));
  EXPECT_TRUE(g.isApprox(Vec3(1, 1, 0.25).asDiagonal().toDenseMatrix()));
  EXPECT_THROW(metric_tensor(baouendi_goulaouic(), Vec3(0, 1, 1)), SingularSetError);
  EXPECT_DOUBLE_EQ(volume_density(euclidean(), Vec3(4, 5, 6)), 1.0);
  EXPECT_DOUBLE_EQ(volume_density(nilpotent_frame(kPi / 2), Vec3(-0.4, 1, 2)), 1.0 / 0.4);
  EXPECT_NEAR(volume_density(nilpotent_frame(kPi / 6), Vec3(2, 3, 4)), 1.0, 1e-15);
  EXPECT_THROW(volume_density(nilpotent_frame(0.4), Vec3(0, 3, 4)), SingularSetError);
}

// Properties: det identity, symmetric positive definite metric, cometric identity.
TEST(Metric, Invariants) {
  const Frame frames[] = {
      parse_frame_spec("alpha=1+0.3*x*y; beta=x*cos(z); nu=x*(1+0.2*y^2)"),
      parse_frame_spec("alpha=2+sin(x*z); beta=y-z; nu=exp(x)-0.5"),
      nilpotent_frame(0.8),
  };
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  for (const Frame& f : frames) {
    for (int i = 0; i < 100; ++i) {
      const Vec3 q(u(rng), u(rng), u(rng));
      const Mat3 m = f.matrix(q);
      EXPECT_LE(std::abs(m.determinant() - f.alpha(q) * f.nu(q)),
                1e-14 * std::max(1.0, std::abs(f.det(q))));
      if (std::abs(f.det(q)) < 1e-3) continue;
      const Mat3 g = metric_tensor(f, q);
      EXPECT_TRUE(g.isApprox(g.transpose(), 0.0));
      const Eigen::SelfAdjointEigenSolver<Mat3> es(g);
      EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
      const Mat3 cometric = m * m.transpose();
      // inverse of the cometric: 1e-12 where g is well conditioned, round-off
      // growing with the condition number elsewhere
      const double cond = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
      const double err = (g * cometric - Mat3::Identity()).cwiseAbs().maxCoeff();
      EXPECT_LE(err, std::max(1e-12, 1e-15 * cond)) << cond;
      if (cond <= 1e3) EXPECT_LE(err, 1e-12);
    }
  }
}

TEST(Brackets, MatchFiniteDifferenceLieBracket) {
  const Frame f = parse_frame_spec("alpha=1+0.3*x*y; beta=x*cos(z)+y^2; nu=x*(1+0.2*y^2)-z*x");
  auto field = [&](int i, const Vec3& q) { return Vec3(f.matrix(q).col(i)); };
  auto bracket = [&](int i, int k, const Vec3& q) {
    const double h = 1e-6;
    Mat3 dXi, dXk;
    for (int v = 0; v < 3; ++v) {
      Vec3 e = Vec3::Zero();
      e[v] = h;
      dXi.col(v) = (field(i, q + e) - field(i, q - e)) / (2 * h);
      dXk.col(v) = (field(k, q + e) - field(k, q - e)) / (2 * h);
    }
    return Vec3(dXk * field(i, q) - dXi * field(k, q));
  };
  const Vec3 q(0.3, -0.4, 0.7);
  const auto br = f.brackets(q);
  EXPECT_LE((br[0] - bracket(0, 1, q)).norm(), 1e-8);
  EXPECT_LE((br[1] - bracket(0, 2, q)).norm(), 1e-8);
  EXPECT_LE((br[2] - bracket(1, 2, q)).norm(), 1e-8);
}

TEST(SingularSet, Samples) {
  const Box cube = Box::cube(1.0);
  EXPECT_TRUE(singular_set_sample(euclidean(), cube, {8, 8, 8}).empty());
  const auto bg = singular_set_sample(baouendi_goulaouic(), cube, {7, 4, 4});
  ASSERT_FALSE(bg.empty());
  for (const Vec3& q : bg) EXPECT_LE(std::abs(q.x()), 1e-12);
  const auto par = singular_set_sample(parse_frame_spec("alpha=1; beta=0; nu=z-x^2"), cube, {6, 6, 7});
  ASSERT_FALSE(par.empty());
  for (const Vec3& q : par) EXPECT_LE(std::abs(q.z() - q.x() * q.x()), 1e-12);
  // deterministic order
  EXPECT_EQ(par, singular_set_sample(parse_frame_spec("alpha=1; beta=0; nu=z-x^2"), cube, {6, 6, 7}));
  EXPECT_THROW(singular_set_sample(euclidean(), Box{}, {2, 2, 2}), PreconditionError);
}

TEST(NormalForm, Validation) {
  for (double sigma : {0.0, 0.4, 1.0, kPi / 2}) {
    const auto rep = validate_normal_form(nilpotent_frame(sigma), FrameKind::Type1);
    EXPECT_TRUE(rep.passed()) << sigma;
    for (const auto& c : rep.checks) EXPECT_LE(std::abs(c.value), 1e-10) << c.name;
  }
  EXPECT_TRUE(validate_normal_form(euclidean(), FrameKind::Riemannian).passed());
  EXPECT_FALSE(validate_normal_form(baouendi_goulaouic(), FrameKind::Type2).passed());
  EXPECT_TRUE(validate_normal_form(baouendi_goulaouic(), FrameKind::Type1).passed());
  EXPECT_TRUE(validate_normal_form(type2_example(), FrameKind::Type2).passed());
  EXPECT_FALSE(validate_normal_form(type2_example(), FrameKind::Type1).passed());
  // mixed second derivative of the surface must vanish
  const auto twisted = validate_normal_form(parse_frame_spec("alpha=1; beta=x; nu=z-x^2-y^2-x*y"),
                                            FrameKind::Type2);
  EXPECT_FALSE(twisted.passed());
  // the surface must not be flat in either direction
  EXPECT_FALSE(validate_normal_form(parse_frame_spec("alpha=1; beta=x; nu=z-x^2"), FrameKind::Type2).passed());
}
