// Runs the reduced one-dimensional heat flow with and without the inverse
// square term and prints the fraction of mass that crossed x = 0.
#include <cstdio>

#include "arsgeo.hpp"

int main() {
  for (bool term : {true, false}) {
    const auto s = ars::barrier_simulation(1.0, 0.0, 1.0, {}, {}, term);
    std::printf("%-22s", term ? "with 3/(4x^2):" : "without 3/(4x^2):");
    for (std::size_t i = 0; i < s.size(); i += 25) {
      const double total = s[i].mass_left + s[i].mass_right;
      std::printf("  t=%.2f %.3e", s[i].t, s[i].mass_left / total);
    }
    std::printf("\n");
  }
}
