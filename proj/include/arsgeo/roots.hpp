#pragma once

// Bracketed scalar root finding.

#include <cmath>
#include <utility>

#include "arsgeo/errors.hpp"

namespace ars {

/// Root of f in [lo, hi] given opposite signs at the ends. Bisects to the
/// requested bracket width, then takes one secant step across the final
/// bracket and keeps it only if it improves the residual.
template <class F>
double bisect_root(F&& f, double lo, double hi, double width = 1e-13) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo < 0) == (fhi < 0)) throw PreconditionError("root bracket has no sign change");
  while (hi - lo > width) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  const double best = std::abs(flo) < std::abs(fhi) ? lo : hi;
  const double best_res = std::min(std::abs(flo), std::abs(fhi));
  const double secant = lo - flo * (hi - lo) / (fhi - flo);
  if (secant >= lo && secant <= hi) {
    const double fs = f(secant);
    if (std::abs(fs) < best_res) return secant;
  }
  return best;
}

}  // namespace ars
