// Plans sampling budgets: per-instance delta-coverage sizes for known
// difficulties, then population-level budgets for a residual target under
// three tail regimes.

#include <cstdio>

#include "camd/coverage.hpp"
#include "camd/difficulty.hpp"

using namespace camd;

int main() {
  std::printf("per-instance N_delta (coverage >= 1-delta at known s)\n");
  std::printf("%8s %8s %8s\n", "s", "delta", "N_delta");
  for (const double s : {0.9, 0.5, 0.2, 0.05}) {
    for (const double delta : {0.05, 0.01}) {
      std::printf("%8.2f %8.2f %8lld\n", s, delta,
                  delta_coverage_size(s, delta));
    }
  }

  const auto families = {
      difficulty_distribution::beta(1.0, 1.0),
      difficulty_distribution::heavy_tail(0.7, 0.5),
      difficulty_distribution::light_truncated(0.2),
  };

  std::printf("\npopulation budget k* for residual <= 0.02 (irreducible 0.01)\n");
  std::printf("%-22s %8s %14s %8s\n", "family", "k*", "residual(k*)",
              "approx");
  for (const auto& dist : families) {
    const auto plan = budget_for_risk(dist, 0.02, 0.01);
    std::printf("%-22s %8lld %14.6g %8s\n",
                std::string(dist.family_name()).c_str(), plan.k,
                residual(dist, plan.k),
                plan.estimate_is_approximate ? "yes" : "no");
  }

  std::printf("\nresidual decay, heavy_tail(0.7, 0.5)\n");
  std::printf("%8s %14s\n", "K", "residual");
  for (long long k = 1; k <= 256; k *= 4)
    std::printf("%8lld %14.6g\n", k, residual(
        difficulty_distribution::heavy_tail(0.7, 0.5), k));
  return 0;
}
