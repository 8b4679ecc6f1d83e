#pragma once

// Globally adaptive 15-point Gauss-Kronrod quadrature.

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <vector>

namespace ars {

struct QuadOptions {
  double abs_tol = 1e-14;
  double rel_tol = 1e-11;
  int max_panels = 1 << 14;
};

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  double magnitude = 0.0;  // integral of |f|, sets the round-off floor
  int panels = 0;
  bool converged = false;
};

namespace detail {

struct Panel {
  double a, b, value, error, magnitude;
  bool operator<(const Panel& o) const { return error < o.error; }
};

template <class F>
Panel gauss_kronrod15(F& f, double a, double b) {
  static constexpr std::array<double, 8> xk{
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.0};
  static constexpr std::array<double, 8> wk{
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg{
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = wk[7] * fc, gauss = wg[3] * fc, mag = wk[7] * std::abs(fc);
  for (int i = 0; i < 7; ++i) {
    const double fl = f(c - h * xk[i]), fr = f(c + h * xk[i]);
    kron += wk[i] * (fl + fr);
    mag += wk[i] * (std::abs(fl) + std::abs(fr));
    if (i % 2 == 1) gauss += wg[i / 2] * (fl + fr);
  }
  return {a, b, kron * h, std::abs((kron - gauss) * h), mag * std::abs(h)};
}

}  // namespace detail

/// Integrates f over consecutive intervals between sorted breakpoints,
/// bisecting the panel with the largest error estimate until the total
/// estimate drops below max(abs_tol, rel_tol*|value|, round-off floor) or the
/// panel limit is reached. The floor is 50 eps times the integral of |f|:
/// cancellation makes smaller errors unreachable.
template <class F>
QuadResult integrate(F&& f, const std::vector<double>& breakpoints, const QuadOptions& opt = {}) {
  std::priority_queue<detail::Panel> heap;
  QuadResult r;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    if (!(breakpoints[i + 1] > breakpoints[i])) continue;
    heap.push(detail::gauss_kronrod15(f, breakpoints[i], breakpoints[i + 1]));
  }
  auto totals = [&] {
    // recomputed from the heap contents to avoid cancellation drift
    auto copy = heap;
    double v = 0, e = 0, m = 0;
    while (!copy.empty()) {
      v += copy.top().value;
      e += copy.top().error;
      m += copy.top().magnitude;
      copy.pop();
    }
    r.value = v;
    r.error = e;
    r.magnitude = m;
  };
  totals();
  double value = r.value, error = r.error;
  auto target = [&](double v) {
    return std::max({opt.abs_tol, opt.rel_tol * std::abs(v), 50 * 2.220446049250313e-16 * r.magnitude});
  };
  int panels = static_cast<int>(heap.size());
  while (!heap.empty() && error > target(value) && panels < opt.max_panels) {
    const detail::Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {
      heap.push(worst);
      break;
    }
    const detail::Panel left = detail::gauss_kronrod15(f, worst.a, mid);
    const detail::Panel right = detail::gauss_kronrod15(f, mid, worst.b);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++panels;
    if (panels % 256 == 0) {
      totals();
      value = r.value;
      error = r.error;
    }
  }
  totals();
  r.panels = panels;
  r.converged = r.error <= target(r.value);
  return r;
}

}  // namespace ars
