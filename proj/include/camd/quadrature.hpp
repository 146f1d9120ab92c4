#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <queue>
#include <vector>

#include "camd/errors.hpp"

namespace camd {

struct quad_result {
  double value = 0.0;
  double abs_error = 0.0;
  int panels = 0;
  bool converged = false;
};

namespace detail {

// Gauss-Kronrod 7-15 nodes and weights on [-1,1] (positive half; node 7 is 0).
inline constexpr double kGk15Nodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000};
inline constexpr double kGk15Weights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714};
// Gauss-7 weights, matching the odd Kronrod nodes (indices 1, 3, 5) and the center.
inline constexpr double kG7Weights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327};

template <class F>
inline void gk15(const F& f, double a, double b, double& value, double& err) {
  const double half = 0.5 * (b - a);
  const double mid = 0.5 * (a + b);
  double fv[15];
  for (int i = 0; i < 7; ++i) {
    fv[i] = f(mid - half * kGk15Nodes[i]);
    fv[14 - i] = f(mid + half * kGk15Nodes[i]);
  }
  fv[7] = f(mid);
  double kron = 0.0;
  for (int i = 0; i < 7; ++i) kron += kGk15Weights[i] * (fv[i] + fv[14 - i]);
  kron += kGk15Weights[7] * fv[7];
  double gauss = kG7Weights[3] * fv[7];
  for (int i = 0; i < 3; ++i) {
    const int j = 2 * i + 1;
    gauss += kG7Weights[i] * (fv[j] + fv[14 - j]);
  }
  value = kron * half;
  err = std::abs((kron - gauss) * half);
}

struct panel {
  double a, b, value, err;
  bool operator<(const panel& o) const { return err < o.err; }
};

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over [a,b].
///
/// `breakpoints` seeds the initial subdivision; pass the locations of kinks,
/// jumps, or the scale of a sharp peak so the first error estimates see them.
/// Termination: total error <= max(rel_tol * |integral|, abs_floor).
template <class F>
inline quad_result integrate(const F& f, double a, double b,
                             double rel_tol = 1e-8,
                             std::vector<double> breakpoints = {},
                             int max_panels = 4000,
                             double abs_floor = 1e-300) {
  if (!(a < b)) throw parameter_domain_error("integrate: empty interval");
  breakpoints.push_back(a);
  breakpoints.push_back(b);
  std::sort(breakpoints.begin(), breakpoints.end());
  breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()),
                    breakpoints.end());

  std::priority_queue<detail::panel> queue;
  double total = 0.0, total_err = 0.0;
  int panels = 0;
  for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
    const double lo = breakpoints[i], hi = breakpoints[i + 1];
    if (lo < a || hi > b || !(lo < hi)) continue;
    detail::panel p{lo, hi, 0.0, 0.0};
    detail::gk15(f, lo, hi, p.value, p.err);
    total += p.value;
    total_err += p.err;
    queue.push(p);
    ++panels;
  }

  while (total_err > std::max(rel_tol * std::abs(total), abs_floor) &&
         panels < max_panels && !queue.empty()) {
    detail::panel worst = queue.top();
    queue.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) continue;  // interval at ulp scale
    detail::panel left{worst.a, mid, 0.0, 0.0}, right{mid, worst.b, 0.0, 0.0};
    detail::gk15(f, left.a, left.b, left.value, left.err);
    detail::gk15(f, right.a, right.b, right.value, right.err);
    total += left.value + right.value - worst.value;
    total_err += left.err + right.err - worst.err;
    queue.push(left);
    queue.push(right);
    ++panels;
  }

  quad_result r;
  r.value = total;
  r.abs_error = total_err;
  r.panels = panels;
  r.converged = total_err <= std::max(rel_tol * std::abs(total), abs_floor);
  return r;
}

}  // namespace camd
