#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "camd/errors.hpp"

namespace camd {

struct ols_fit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double slope_se = 0.0;

  double ci95_lo() const { return slope - 1.96 * slope_se; }
  double ci95_hi() const { return slope + 1.96 * slope_se; }
};

/// Least-squares line through (x, y); slope_se assumes iid residuals and is
/// zero when fewer than three points leave no residual degrees of freedom.
inline ols_fit fit_ols(const std::vector<double>& xs,
                       const std::vector<double>& ys) {
  if (xs.size() != ys.size())
    throw shape_error("fit_ols: x and y lengths differ");
  const std::size_t n = xs.size();
  if (n < 2) throw empty_input_error("fit_ols: need at least two points");

  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);

  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0.0))
    throw parameter_domain_error("fit_ols: x values are all identical");

  ols_fit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;

  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = ys[i] - (fit.intercept + fit.slope * xs[i]);
    sse += e * e;
  }
  fit.r2 = syy > 0.0 ? 1.0 - sse / syy : 1.0;
  if (n > 2) fit.slope_se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  return fit;
}

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw empty_input_error("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

inline double sample_sd(const std::vector<double>& xs) {
  if (xs.size() < 2) throw empty_input_error("sd needs two points");
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(xs.size() - 1));
}

inline double standard_error(const std::vector<double>& xs) {
  return sample_sd(xs) / std::sqrt(static_cast<double>(xs.size()));
}

}  // namespace camd
