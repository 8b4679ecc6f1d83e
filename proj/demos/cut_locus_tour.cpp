// Prints the cut time, the cut half-planes and a few points of the boundary
// curves for one member of the nilpotent family, then checks one shot.
#include <cstdio>
#include <cstdlib>

#include "arsgeo.hpp"

int main(int argc, char** argv) {
  namespace nil = ars::nilpotent;
  const double sigma = argc > 1 ? std::atof(argv[1]) : 0.8;
  const auto ang = nil::cut_angles(sigma);
  std::printf("sigma = %.6f  tau = %.12f  theta+ = %.12f  theta- = %.12f\n", sigma, nil::tau(sigma), ang.plus,
              ang.minus);
  for (double a : {0.5, 1.0, 2.0}) {
    const ars::Vec3 up = nil::cut_locus_curve(sigma, +1, a), down = nil::cut_locus_curve(sigma, -1, a);
    std::printf("a = %.1f  upper (%.6f, %.6f, %.6f)  lower (%.6f, %.6f, %.6f)\n", a, up.x(), up.y(), up.z(),
                down.x(), down.y(), down.z());
  }
  // the geodesic reaching the upper curve at a = 1 has length 2 tau
  const ars::Vec3 target = nil::cut_locus_curve(sigma, +1, 1.0);
  ars::ShootOptions o;
  o.theta_seeds = 8;
  const auto r = ars::shoot_distance(ars::nilpotent_frame(sigma), ars::Vec3::Zero(), target, o);
  std::printf("shooting distance %.9f vs 2 tau %.9f (residual %.1e)\n", r.distance, 2 * nil::tau(sigma), r.residual);
}
