#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "camd/difficulty.hpp"
#include "camd/errors.hpp"
#include "camd/quadrature.hpp"
#include "camd/rng.hpp"

namespace camd {

struct risk_profile {
  long long k = 1;
  double coverage = 0.0;
  double residual = 1.0;
  double r_irr = 0.0;

  double total_risk() const {
    return std::clamp(residual + r_irr, 0.0, 1.0);
  }
};

struct budget_plan {
  long long k = 1;
  // Closed-form order-of-magnitude estimate from the tail regime, for
  // comparison against the searched exact k.
  double theory_estimate = 0.0;
  bool estimate_is_approximate = true;
};

struct mc_estimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_draws = 0;
};

namespace detail {

inline void require_k(long long k) {
  if (k < 1) throw parameter_domain_error("sample count k must be >= 1");
}

inline double pow_one_minus(double s, double k) {
  if (s >= 1.0) return 0.0;
  return std::exp(k * std::log1p(-s));
}

// E[(1-s)^k] = k * int_0^1 (1-s)^(k-1) F(s) ds, valid for mixed
// distributions with atoms. The integrand concentrates at scale 1/k near
// zero, so the initial panels are seeded on a dyadic ladder there.
inline double quadrature_residual(const difficulty_distribution& dist,
                                  long long k) {
  std::vector<double> bps = dist.quadrature_breakpoints();
  const double kd = static_cast<double>(k);
  for (double x = 0.25 / kd; x < 1.0; x *= 2.0) bps.push_back(x);
  const double logk = std::log(kd);
  auto f = [&](double s) {
    if (s >= 1.0) return 0.0;
    return std::exp(logk + (kd - 1.0) * std::log1p(-s)) * dist.cdf(s);
  };
  const quad_result q = integrate(f, 0.0, 1.0, 1e-8, std::move(bps));
  return std::clamp(q.value, 0.0, 1.0);
}

}  // namespace detail

/// Expected residual failure probability E[(1-s)^k] after k samples.
inline double residual(const difficulty_distribution& dist, long long k) {
  detail::require_k(k);
  if (const auto* pm = dist.get_if<point_mass_params>())
    return detail::pow_one_minus(pm->s, static_cast<double>(k));
  if (const auto* be = dist.get_if<beta_params>()) {
    const double kd = static_cast<double>(k);
    return std::exp(std::lgamma(be->b + kd) - std::lgamma(be->a + be->b + kd) +
                    std::lgamma(be->a + be->b) - std::lgamma(be->b));
  }
  return detail::quadrature_residual(dist, k);
}

/// Coverage E[1-(1-s)^k]; complements residual exactly.
inline double coverage(const difficulty_distribution& dist, long long k) {
  return 1.0 - residual(dist, k);
}

inline risk_profile make_risk_profile(const difficulty_distribution& dist,
                                      long long k, double r_irr = 0.0) {
  detail::require_k(k);
  if (!(r_irr >= 0.0 && r_irr < 1.0))
    throw parameter_domain_error("r_irr must lie in [0,1)");
  risk_profile rp;
  rp.k = k;
  rp.residual = residual(dist, k);
  rp.coverage = 1.0 - rp.residual;
  rp.r_irr = r_irr;
  return rp;
}

/// Smallest n with 1-(1-s)^n >= 1-delta; the ceil formula is verified and
/// nudged so the returned n satisfies the inequality and n-1 does not.
inline long long delta_coverage_size(double s, double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw parameter_domain_error("delta must lie in (0,1)");
  if (!(s > 0.0))
    throw parameter_domain_error("s must be positive: no finite n exists");
  if (s >= 1.0) return 1;
  const double log_fail = std::log1p(-s);
  long long n = static_cast<long long>(std::ceil(std::log(delta) / log_fail));
  n = std::max<long long>(n, 1);
  auto ok = [&](long long m) {
    return detail::pow_one_minus(s, static_cast<double>(m)) <= delta;
  };
  while (!ok(n)) ++n;
  while (n > 1 && ok(n - 1)) --n;
  return n;
}

/// min over x>0 of (x + c*x^-theta): the decay constant in front of
/// k^(theta/(theta+1)) for the stretched-exponential regime.
inline double laplace_tail_constant(double theta, double c) {
  if (!(theta > 0.0) || !(c > 0.0))
    throw parameter_domain_error("laplace_tail_constant: theta, c must be > 0");
  auto f = [&](double t) { return std::exp(t) + c * std::exp(-theta * t); };
  double lo = -60.0, hi = 60.0;
  for (int i = 0; i < 300; ++i) {
    const double m1 = lo + (hi - lo) / 3.0;
    const double m2 = hi - (hi - lo) / 3.0;
    if (f(m1) < f(m2))
      hi = m2;
    else
      lo = m1;
  }
  return f(0.5 * (lo + hi));
}

/// Asymptotic decay of the residual at k for the three tail regimes.
inline double tail_rate_prediction(const difficulty_distribution& dist,
                                   long long k) {
  detail::require_k(k);
  const double kd = static_cast<double>(k);
  if (const auto* ht = dist.get_if<heavy_tail_params>()) {
    return std::exp(std::log(ht->kappa) + std::lgamma(ht->alpha) -
                    ht->alpha * std::log(kd));
  }
  if (const auto* se = dist.get_if<stretched_exp_params>()) {
    const double c_theta = laplace_tail_constant(se->theta, se->c);
    return std::exp(-c_theta * std::pow(kd, se->theta / (se->theta + 1.0)));
  }
  if (const auto* lt = dist.get_if<light_truncated_params>()) {
    const double c_prime = -std::log1p(-lt->s_min);
    // Worst-case coefficient: the censored atom carries exactly the
    // geometric term (1-s_min)^k.
    const double atom_mass =
        lt->base ? lt->base->cdf(lt->s_min) : lt->s_min;
    return atom_mass * std::exp(-c_prime * kd);
  }
  throw unsupported_family_error(
      "tail_rate_prediction: only heavy_tail, stretched_exp, light_truncated "
      "have a tail regime; use residual() for point_mass/beta");
}

/// Smallest k with residual(dist,k) <= epsilon - r_irr, by
/// exponential-then-binary search on the monotone residual.
inline budget_plan budget_for_risk(const difficulty_distribution& dist,
                                   double epsilon, double r_irr = 0.0) {
  if (!(epsilon > 0.0 && epsilon <= 1.0))
    throw parameter_domain_error("epsilon must lie in (0,1]");
  if (!(r_irr >= 0.0 && r_irr < 1.0))
    throw parameter_domain_error("r_irr must lie in [0,1)");
  if (!(epsilon > r_irr))
    throw infeasible_target_error(
        "target risk epsilon must exceed the irreducible risk r_irr");
  const double target = epsilon - r_irr;

  long long hi = 1;
  while (residual(dist, hi) > target) {
    if (hi > (1LL << 40))
      throw infeasible_target_error(
          "no practical sample count reaches the target residual");
    hi *= 2;
  }
  long long lo = hi / 2;  // residual(lo) > target when lo >= 1
  while (lo + 1 < hi) {
    const long long mid = lo + (hi - lo) / 2;
    if (residual(dist, mid) <= target)
      hi = mid;
    else
      lo = mid;
  }

  budget_plan plan;
  plan.k = hi;
  if (const auto* pm = dist.get_if<point_mass_params>()) {
    plan.theory_estimate = std::log(target) / std::log1p(-pm->s);
    plan.estimate_is_approximate = false;
  } else if (const auto* be = dist.get_if<beta_params>()) {
    const double coef =
        std::exp(std::lgamma(be->a + be->b) - std::lgamma(be->b));
    plan.theory_estimate = std::pow(coef / target, 1.0 / be->a);
  } else if (const auto* ht = dist.get_if<heavy_tail_params>()) {
    plan.theory_estimate =
        std::pow(ht->kappa * std::tgamma(ht->alpha) / target, 1.0 / ht->alpha);
  } else if (const auto* se = dist.get_if<stretched_exp_params>()) {
    const double c_theta = laplace_tail_constant(se->theta, se->c);
    plan.theory_estimate = std::pow(std::log(1.0 / target) / c_theta,
                                    (se->theta + 1.0) / se->theta);
  } else if (const auto* lt = dist.get_if<light_truncated_params>()) {
    const double c_prime = -std::log1p(-lt->s_min);
    const double atom_mass =
        lt->base ? lt->base->cdf(lt->s_min) : lt->s_min;
    plan.theory_estimate = std::log(atom_mass / target) / c_prime;
  }
  plan.theory_estimate = std::max(plan.theory_estimate, 1.0);
  return plan;
}

/// Monte Carlo estimate of the residual: mean of (1-s_i)^k over n draws.
inline mc_estimate monte_carlo_residual(const difficulty_distribution& dist,
                                        long long k, std::size_t n_draws,
                                        std::uint64_t seed) {
  detail::require_k(k);
  if (n_draws == 0) throw parameter_domain_error("n_draws must be >= 1");
  auto rng = make_engine(seed);
  const double kd = static_cast<double>(k);
  double sum = 0.0, sumsq = 0.0;
  for (std::size_t i = 0; i < n_draws; ++i) {
    const double v = detail::pow_one_minus(dist.sample(rng), kd);
    sum += v;
    sumsq += v * v;
  }
  mc_estimate est;
  est.n_draws = n_draws;
  est.mean = sum / static_cast<double>(n_draws);
  const double var =
      std::max(0.0, sumsq / static_cast<double>(n_draws) - est.mean * est.mean);
  est.std_error = std::sqrt(var / static_cast<double>(n_draws));
  return est;
}

}  // namespace camd
