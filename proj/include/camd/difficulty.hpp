#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "camd/errors.hpp"
#include "camd/quadrature.hpp"
#include "camd/rng.hpp"

namespace camd {

class difficulty_distribution;

struct point_mass_params {
  double s = 0.5;
};

struct beta_params {
  double a = 1.0;
  double b = 1.0;
};

// Density kappa * s^(alpha-1) on (0, s_max]; leftover mass sits as an atom
// at s_max so the lower tail stays exactly polynomial.
struct heavy_tail_params {
  double alpha = 0.5;
  double kappa = 0.5;
  double s_max = 1.0;
};

// Lower-tail CDF exp(-c * s^-theta) below the crossover, linear in s above it
// (uniform leftover mass on (crossover, 1]).
struct stretched_exp_params {
  double theta = 1.0;
  double c = 1.0;
};

// Censored base draw: s = max(base_draw, s_min). Puts an atom at s_min of
// mass base_cdf(s_min). Null base means Beta(1,1).
struct light_truncated_params {
  double s_min = 0.1;
  std::shared_ptr<const difficulty_distribution> base;
};

inline constexpr double kStretchedExpCrossover = 0.5;
inline constexpr double kPointMassClamp = 1.0 - 1e-12;

namespace detail {

// Regularized incomplete beta I_x(a,b) by Lentz continued fraction.
inline double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16, kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::abs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

inline double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) -
                          std::lgamma(b) + a * std::log(x) +
                          b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

class difficulty_distribution {
 public:
  using params_variant =
      std::variant<point_mass_params, beta_params, heavy_tail_params,
                   stretched_exp_params, light_truncated_params>;

  explicit difficulty_distribution(params_variant p) : params_(std::move(p)) {
    validate();
  }

  static difficulty_distribution point_mass(double s) {
    return difficulty_distribution(point_mass_params{s});
  }
  static difficulty_distribution beta(double a, double b) {
    return difficulty_distribution(beta_params{a, b});
  }
  static difficulty_distribution heavy_tail(double alpha, double kappa,
                                            double s_max = 1.0) {
    return difficulty_distribution(heavy_tail_params{alpha, kappa, s_max});
  }
  static difficulty_distribution stretched_exp(double theta, double c) {
    return difficulty_distribution(stretched_exp_params{theta, c});
  }
  static difficulty_distribution light_truncated(double s_min) {
    return difficulty_distribution(light_truncated_params{s_min, nullptr});
  }
  static difficulty_distribution light_truncated(double s_min,
                                                 difficulty_distribution base) {
    return difficulty_distribution(light_truncated_params{
        s_min,
        std::make_shared<const difficulty_distribution>(std::move(base))});
  }

  const params_variant& params() const { return params_; }

  template <class T>
  const T* get_if() const {
    return std::get_if<T>(&params_);
  }

  std::string_view family_name() const {
    switch (params_.index()) {
      case 0: return "point_mass";
      case 1: return "beta";
      case 2: return "heavy_tail";
      case 3: return "stretched_exp";
      default: return "light_truncated";
    }
  }

  /// Right-continuous CDF on [0,1]; atoms (heavy-tail s_max remainder,
  /// censoring floor) are included at their location.
  double cdf(double s) const {
    if (s < 0.0) return 0.0;
    if (s >= 1.0) return 1.0;
    return std::visit(
        [s](const auto& p) -> double { return cdf_impl(p, s); }, params_);
  }

  double sample(std::mt19937_64& rng) const {
    return std::visit(
        [&rng](const auto& p) -> double { return sample_impl(p, rng); },
        params_);
  }

  /// E[s]; closed form where one exists, otherwise quadrature of 1 - CDF.
  double mean() const {
    if (const auto* pm = get_if<point_mass_params>()) return pm->s;
    if (const auto* be = get_if<beta_params>())
      return be->a / (be->a + be->b);
    if (const auto* ht = get_if<heavy_tail_params>()) {
      const double cont_mass =
          ht->kappa * std::pow(ht->s_max, ht->alpha) / ht->alpha;
      const double cont_mean = ht->kappa *
                               std::pow(ht->s_max, ht->alpha + 1.0) /
                               (ht->alpha + 1.0);
      return cont_mean + (1.0 - cont_mass) * ht->s_max;
    }
    const auto q = integrate([this](double s) { return 1.0 - cdf(s); }, 0.0,
                             1.0, 1e-10, quadrature_breakpoints());
    return q.value;
  }

  /// Knots where the CDF kinks or has atoms; seeds for adaptive quadrature.
  std::vector<double> quadrature_breakpoints() const {
    std::vector<double> knots;
    if (const auto* pm = get_if<point_mass_params>()) {
      knots.push_back(pm->s);
    } else if (const auto* ht = get_if<heavy_tail_params>()) {
      knots.push_back(ht->s_max);
    } else if (get_if<stretched_exp_params>()) {
      knots.push_back(kStretchedExpCrossover);
    } else if (const auto* lt = get_if<light_truncated_params>()) {
      knots.push_back(lt->s_min);
      if (lt->base) {
        for (double k : lt->base->quadrature_breakpoints())
          if (k > lt->s_min) knots.push_back(k);
      }
    }
    return knots;
  }

  nlohmann::json to_json() const {
    nlohmann::json params = nlohmann::json::object();
    if (const auto* pm = get_if<point_mass_params>()) {
      params["s"] = pm->s;
    } else if (const auto* be = get_if<beta_params>()) {
      params["a"] = be->a;
      params["b"] = be->b;
    } else if (const auto* ht = get_if<heavy_tail_params>()) {
      params["alpha"] = ht->alpha;
      params["kappa"] = ht->kappa;
      params["s_max"] = ht->s_max;
    } else if (const auto* se = get_if<stretched_exp_params>()) {
      params["theta"] = se->theta;
      params["c"] = se->c;
    } else if (const auto* lt = get_if<light_truncated_params>()) {
      params["s_min"] = lt->s_min;
      if (lt->base) params["base"] = lt->base->to_json();
    }
    return nlohmann::json{{"family", std::string(family_name())},
                          {"params", params}};
  }

  static difficulty_distribution from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("family") || !j.contains("params"))
      throw parameter_domain_error(
          "distribution json requires {\"family\", \"params\"}");
    const std::string family = j.at("family").get<std::string>();
    const nlohmann::json& p = j.at("params");
    try {
      if (family == "point_mass")
        return point_mass(p.at("s").get<double>());
      if (family == "beta")
        return beta(p.at("a").get<double>(), p.at("b").get<double>());
      if (family == "heavy_tail")
        return heavy_tail(p.at("alpha").get<double>(),
                          p.at("kappa").get<double>(),
                          p.value("s_max", 1.0));
      if (family == "stretched_exp")
        return stretched_exp(p.at("theta").get<double>(),
                             p.at("c").get<double>());
      if (family == "light_truncated") {
        const double s_min = p.at("s_min").get<double>();
        if (p.contains("base"))
          return light_truncated(s_min, from_json(p.at("base")));
        return light_truncated(s_min);
      }
    } catch (const nlohmann::json::exception& e) {
      throw parameter_domain_error("distribution json for family '" + family +
                                   "': " + e.what());
    }
    throw unsupported_family_error("unknown distribution family '" + family +
                                   "'");
  }

 private:
  void validate() {
    auto need = [](bool ok, const char* msg) {
      if (!ok) throw parameter_domain_error(msg);
    };
    if (auto* pm = std::get_if<point_mass_params>(&params_)) {
      need(std::isfinite(pm->s) && pm->s > 0.0 && pm->s <= 1.0,
           "point_mass: s must lie in (0,1]");
      if (pm->s > kPointMassClamp) pm->s = kPointMassClamp;
    } else if (const auto* be = std::get_if<beta_params>(&params_)) {
      need(std::isfinite(be->a) && be->a > 0.0, "beta: a must be > 0");
      need(std::isfinite(be->b) && be->b > 0.0, "beta: b must be > 0");
    } else if (const auto* ht = std::get_if<heavy_tail_params>(&params_)) {
      need(std::isfinite(ht->alpha) && ht->alpha > 0.0,
           "heavy_tail: alpha must be > 0");
      need(std::isfinite(ht->kappa) && ht->kappa > 0.0,
           "heavy_tail: kappa must be > 0");
      need(std::isfinite(ht->s_max) && ht->s_max > 0.0 && ht->s_max <= 1.0,
           "heavy_tail: s_max must lie in (0,1]");
      const double cont_mass =
          ht->kappa * std::pow(ht->s_max, ht->alpha) / ht->alpha;
      need(cont_mass <= 1.0 + 1e-12,
           "heavy_tail: kappa*s_max^alpha/alpha exceeds total mass 1");
    } else if (const auto* se = std::get_if<stretched_exp_params>(&params_)) {
      need(std::isfinite(se->theta) && se->theta > 0.0,
           "stretched_exp: theta must be > 0");
      need(std::isfinite(se->c) && se->c > 0.0, "stretched_exp: c must be > 0");
    } else if (const auto* lt = std::get_if<light_truncated_params>(&params_)) {
      need(std::isfinite(lt->s_min) && lt->s_min > 0.0 && lt->s_min < 1.0,
           "light_truncated: s_min must lie in (0,1)");
    }
  }

  static double cdf_impl(const point_mass_params& p, double s) {
    return s >= p.s ? 1.0 : 0.0;
  }
  static double cdf_impl(const beta_params& p, double s) {
    return detail::reg_inc_beta(p.a, p.b, s);
  }
  static double cdf_impl(const heavy_tail_params& p, double s) {
    if (s >= p.s_max) return 1.0;
    const double f = p.kappa * std::pow(s, p.alpha) / p.alpha;
    return std::min(f, 1.0);
  }
  static double cdf_impl(const stretched_exp_params& p, double s) {
    if (s <= 0.0) return 0.0;
    const double f0 =
        std::exp(-p.c * std::pow(kStretchedExpCrossover, -p.theta));
    if (s <= kStretchedExpCrossover)
      return std::exp(-p.c * std::pow(s, -p.theta));
    return f0 + (1.0 - f0) * (s - kStretchedExpCrossover) /
                    (1.0 - kStretchedExpCrossover);
  }
  static double cdf_impl(const light_truncated_params& p, double s) {
    if (s < p.s_min) return 0.0;
    return base_cdf(p, s);
  }

  static double base_cdf(const light_truncated_params& p, double s) {
    if (p.base) return p.base->cdf(s);
    if (s <= 0.0) return 0.0;
    return std::min(s, 1.0);
  }

  static double sample_impl(const point_mass_params& p, std::mt19937_64&) {
    return p.s;
  }
  static double sample_impl(const beta_params& p, std::mt19937_64& rng) {
    std::gamma_distribution<double> ga(p.a, 1.0), gb(p.b, 1.0);
    const double x = ga(rng);
    const double y = gb(rng);
    const double denom = x + y;
    if (denom <= 0.0) return kPointMassClamp;  // both underflowed
    const double s = x / denom;
    return std::min(std::max(s, 1e-308), 1.0);
  }
  static double sample_impl(const heavy_tail_params& p, std::mt19937_64& rng) {
    const double cont_mass =
        std::min(p.kappa * std::pow(p.s_max, p.alpha) / p.alpha, 1.0);
    const double u = uniform_unit(rng);
    if (u > cont_mass) return p.s_max;
    return p.s_max * std::pow(u / cont_mass, 1.0 / p.alpha);
  }
  static double sample_impl(const stretched_exp_params& p,
                            std::mt19937_64& rng) {
    const double f0 =
        std::exp(-p.c * std::pow(kStretchedExpCrossover, -p.theta));
    const double u = uniform_unit(rng);
    if (u <= f0) return std::pow(p.c / -std::log(u), 1.0 / p.theta);
    return kStretchedExpCrossover + (u - f0) / (1.0 - f0) *
                                        (1.0 - kStretchedExpCrossover);
  }
  static double sample_impl(const light_truncated_params& p,
                            std::mt19937_64& rng) {
    double s;
    if (p.base) {
      s = p.base->sample(rng);
    } else {
      s = uniform_unit(rng);
    }
    return std::max(s, p.s_min);
  }

  params_variant params_;
};

inline double sample_difficulty(const difficulty_distribution& dist,
                                std::uint64_t seed) {
  auto rng = make_engine(seed);
  return dist.sample(rng);
}

}  // namespace camd
