// Acceptance gate: every release-blocking behavior checked end to end, one
// PASS/FAIL line per criterion. Run all, or a single one with
// --criterion N. Exit status 0 iff everything ran green inside its time
// budget.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "camd/config.hpp"
#include "camd/controller.hpp"
#include "camd/coverage.hpp"
#include "camd/experiment.hpp"
#include "camd/scoring.hpp"
#include "camd/stats.hpp"
#include "camd/synthetic.hpp"

using namespace camd;

namespace {

struct outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* pattern, double a, double b = 0.0,
                double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), pattern, a, b, c);
  return buf;
}

// --- 1. minimal sample count for a coverage target ------------------------

outcome criterion_delta_coverage() {
  auto rng = make_engine(11001);
  std::uniform_real_distribution<double> us(0.01, 0.999);
  std::uniform_real_distribution<double> ud(0.001, 0.5);
  long long checked = 0;
  for (int t = 0; t < 1000; ++t) {
    const double s = us(rng);
    const double delta = ud(rng);
    const long long n = delta_coverage_size(s, delta);
    const bool covers = detail::pow_one_minus(s, static_cast<double>(n)) <=
                        delta;
    const bool minimal =
        n == 1 ||
        detail::pow_one_minus(s, static_cast<double>(n - 1)) > delta;
    if (!covers || !minimal)
      return {false, fmt("violated at s=%.6f delta=%.6f", s, delta)};
    ++checked;
  }
  if (delta_coverage_size(1.0, 0.05) != 1)
    return {false, "s=1 should need exactly one sample"};
  return {true, "1000 random (s, delta) pairs exactly minimal"};
}

// --- 2. uniform-difficulty closed form -------------------------------------

outcome criterion_uniform_residual() {
  const auto uniform = difficulty_distribution::beta(1.0, 1.0);
  double worst = 0.0;
  for (long long k = 1; k <= 10000; ++k) {
    const double got = residual(uniform, k);
    const double want = 1.0 / static_cast<double>(k + 1);
    worst = std::max(worst, std::abs(got - want));
  }
  if (worst > 1e-10) return {false, fmt("max error %.3e > 1e-10", worst)};
  return {true, fmt("max |residual - 1/(k+1)| = %.3e over k <= 1e4", worst)};
}

// --- 3. polynomial residual decay under a heavy lower tail -----------------

outcome criterion_heavy_tail_slope() {
  const std::vector<long long> ks = {64, 128, 256, 512, 1024};
  std::ostringstream note;
  for (const double alpha : {0.5, 0.7, 1.0}) {
    const auto dist = difficulty_distribution::heavy_tail(alpha, 0.5);
    auto rng = make_engine(33000 + static_cast<std::uint64_t>(alpha * 10));
    const long long n = 1000000;
    std::vector<double> draws(n);
    for (auto& s : draws) s = dist.sample(rng);

    std::vector<double> xs, ys;
    for (const long long k : ks) {
      double acc = 0.0;
      for (const double s : draws)
        acc += detail::pow_one_minus(s, static_cast<double>(k));
      xs.push_back(std::log(static_cast<double>(k)));
      ys.push_back(std::log(acc / static_cast<double>(n)));
    }
    const auto fit = fit_ols(xs, ys);
    if (std::abs(fit.slope + alpha) > 0.15)
      return {false, fmt("alpha=%.1f slope %.4f off by > 0.15", alpha,
                         fit.slope)};
    note << " " << fmt("a=%.1f:%.3f", alpha, fit.slope);
  }
  return {true, "log-log slopes" + note.str() + " all within 0.15"};
}

// --- 4. geometric residual decay when difficulty is bounded away from 0 ----

outcome criterion_light_tail_slope() {
  const auto dist = difficulty_distribution::light_truncated(0.2);
  auto rng = make_engine(44001);
  const long long n = 1000000;
  std::vector<double> draws(n);
  for (auto& s : draws) s = dist.sample(rng);

  std::vector<double> xs, ys;
  for (const long long k : {8, 16, 32, 64, 128}) {
    double acc = 0.0;
    for (const double s : draws)
      acc += detail::pow_one_minus(s, static_cast<double>(k));
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(acc / static_cast<double>(n)));
  }
  const auto fit = fit_ols(xs, ys);
  const double want = std::log(0.8);
  if (std::abs(fit.slope - want) > 0.02)
    return {false, fmt("slope %.5f vs %.5f off by > 0.02", fit.slope, want)};
  if (fit.r2 < 0.99) return {false, fmt("r2 %.5f < 0.99", fit.r2)};
  return {true, fmt("slope %.5f vs log(0.8)=%.5f, r2=%.6f", fit.slope, want,
                    fit.r2)};
}

// --- 5. stretched-exponential residual decay --------------------------------

outcome criterion_stretched_slope() {
  std::ostringstream note;
  for (const double theta : {0.5, 1.0}) {
    const auto dist = difficulty_distribution::stretched_exp(theta, 1.0);
    std::vector<double> xs, ys;
    for (long long k = 64; k <= (1 << 14); k *= 2) {
      const double d = residual(dist, k);
      xs.push_back(std::log(static_cast<double>(k)));
      ys.push_back(std::log(-std::log(d)));
    }
    const auto fit = fit_ols(xs, ys);
    const double want = theta / (theta + 1.0);
    if (std::abs(fit.slope - want) > 0.10)
      return {false, fmt("theta=%.1f exponent %.4f vs %.4f off by > 0.1",
                         theta, fit.slope, want)};
    note << " " << fmt("t=%.1f:%.3f", theta, fit.slope);
  }
  return {true, "stretch exponents" + note.str() + " within 0.1"};
}

// --- 6. sequential soft-count updates equal the one-shot update -------------

outcome criterion_conjugacy() {
  auto rng = make_engine(66001);
  std::uniform_int_distribution<int> um(1, 8);
  std::uniform_real_distribution<double> ur(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const int m = um(rng);
    std::uniform_int_distribution<int> un(m, 40);
    const int n = un(rng);

    cluster_set cs;
    cs.similarity_threshold = 0.85;
    cs.clusters.resize(m);
    for (int i = 0; i < n; ++i) {
      const int c = i < m ? i : um(rng) % m;
      cs.clusters[c].members.push_back(static_cast<std::size_t>(i));
    }
    for (auto& c : cs.clusters) c.representative = c.members.front();

    const int rounds = 100;
    std::vector<std::vector<double>> pieces(
        rounds, std::vector<double>(static_cast<std::size_t>(n)));
    std::vector<double> total(static_cast<std::size_t>(n), 0.0);
    for (auto& piece : pieces) {
      double z = 0.0;
      for (auto& v : piece) {
        v = ur(rng) + 1e-9;
        z += v;
      }
      for (std::size_t i = 0; i < piece.size(); ++i) {
        piece[i] /= z;
        total[i] += piece[i];
      }
    }

    controller_state blank;
    blank.prior_concentration = 1.0;
    const auto oneshot = update_posterior(blank, cs, total);
    controller_state seq = blank;
    for (const auto& piece : pieces) seq = update_posterior(seq, cs, piece);

    for (int k = 0; k < m; ++k) {
      worst = std::max(worst, std::abs(seq.alpha[static_cast<std::size_t>(k)] -
                                       oneshot.alpha[static_cast<std::size_t>(k)]));
      worst = std::max(
          worst, std::abs(seq.soft_counts[static_cast<std::size_t>(k)] -
                          oneshot.soft_counts[static_cast<std::size_t>(k)]));
    }
  }
  if (worst > 1e-12) return {false, fmt("max divergence %.3e > 1e-12", worst)};
  return {true, fmt("1000 cases x 100 splits, max divergence %.3e", worst)};
}

// --- 7. scoring algebra on random candidates --------------------------------

outcome criterion_scoring_algebra() {
  auto rng = make_engine(77001);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> ulp(-3.0, 0.0);
  std::uniform_real_distribution<double> uscale(1e-3, 1e3);

  const auto rvec = [&](std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = g(rng);
    return v;
  };

  evidence_context ctx;
  ctx.visual_features = {rvec(8), rvec(8)};
  ctx.text_features = {rvec(8)};

  const int n = 10000;
  std::vector<double> combined(n);
  double worst_affinity = 0.0, worst_scale = 0.0;
  candidate prev;
  double prev_sim = 0.0;
  for (int i = 0; i < n; ++i) {
    candidate c;
    c.answer_text = "x";
    for (int j = 0; j < 4; ++j) {
      c.token_logprobs.push_back(ulp(rng));
      c.token_embeddings.push_back(rvec(8));
      c.hidden_states.push_back(rvec(8));
    }
    const double sg = score_generation(c);
    const double sa = score_alignment(c, ctx);
    const double sc = score_coherence(c);
    combined[static_cast<std::size_t>(i)] = combine_scores(sg, sa, sc);

    worst_affinity = std::max(
        worst_affinity,
        std::abs((combine_scores(sg, sa + 1.0, sc) -
                  combine_scores(sg, sa, sc)) -
                 1.0));

    candidate scaled = c;
    for (auto& e : scaled.token_embeddings) {
      const double k = uscale(rng);
      for (auto& x : e) x *= k;
    }
    for (auto& h : scaled.hidden_states) {
      const double k = uscale(rng);
      for (auto& x : h) x *= k;
    }
    worst_scale = std::max(worst_scale,
                           std::abs(score_alignment(scaled, ctx) - sa));
    worst_scale = std::max(worst_scale,
                           std::abs(score_coherence(scaled) - sc));
    if (i > 0) {
      candidate uniform = c;
      const double k = uscale(rng);
      for (auto& e : uniform.token_embeddings)
        for (auto& x : e) x *= k;
      const double sim = pairwise_similarity(prev, c);
      worst_scale = std::max(
          worst_scale, std::abs(pairwise_similarity(prev, uniform) - sim));
      prev_sim = sim;
    }
    prev = c;
  }
  (void)prev_sim;

  const auto w0 = normalize_weights(combined);
  auto shifted = combined;
  for (auto& x : shifted) x += 123.456;
  const auto w1 = normalize_weights(shifted);
  double worst_shift = 0.0;
  for (int i = 0; i < n; ++i)
    worst_shift = std::max(worst_shift,
                           std::abs(w0[static_cast<std::size_t>(i)] -
                                    w1[static_cast<std::size_t>(i)]));

  if (worst_affinity > 1e-9)
    return {false, fmt("alignment affinity error %.3e > 1e-9", worst_affinity)};
  if (worst_scale > 1e-9)
    return {false, fmt("cosine scale error %.3e > 1e-9", worst_scale)};
  if (worst_shift > 1e-9)
    return {false, fmt("softmax shift error %.3e > 1e-9", worst_shift)};
  return {true, fmt("affinity %.1e, scale %.1e, shift %.1e on 1e4 candidates",
                    worst_affinity, worst_scale, worst_shift)};
}

// --- shared harness for the controller criteria ----------------------------

controller_config campaign_controller_config() {
  controller_config ccfg;
  ccfg.dedup_threshold = 0.999;
  ccfg.cluster_threshold = 0.85;
  ccfg.batch_size = 2;
  ccfg.max_samples = 64;
  return ccfg;
}

// --- 8. adaptive rule meets its coverage target at near-oracle cost --------

outcome criterion_controller_coverage() {
  const auto dist = difficulty_distribution::point_mass(0.9);
  synthetic_config syn;
  syn.separation_threshold = 0.85;
  const long long n = 10000;

  long long pool_hits = 0;
  long long samples = 0;
  for (long long i = 0; i < n; ++i) {
    const auto inst = make_instance(dist, 8, 4, derive_seed(88001, i), syn);
    synthetic_backend backend(syn);
    backend.register_instance("x", inst);
    const auto ctx = backend.context("x");
    adaptive_controller ctl(stopping_policy::camd(0.05),
                            campaign_controller_config(), &ctx);
    bool hit = false;
    step_decision d;
    do {
      const auto gb =
          backend.generate_labeled("x", ctl.requested_batch(),
                                   derive_seed(88001, i));
      for (const int c : gb.correct) hit = hit || c == 1;
      d = ctl.step(gb.candidates);
    } while (!d.stop);
    pool_hits += hit ? 1 : 0;
    samples += ctl.state().samples_used;
  }

  const double cov = static_cast<double>(pool_hits) / static_cast<double>(n);
  const double se = std::sqrt(cov * (1.0 - cov) / static_cast<double>(n));
  const double mean_samples =
      static_cast<double>(samples) / static_cast<double>(n);
  if (cov < 0.95 - 1.5 * se)
    return {false, fmt("coverage %.4f < 0.95 - 1.5se (se %.4f)", cov, se)};
  if (mean_samples > 3.0)
    return {false, fmt("mean samples %.3f > 3", mean_samples)};
  return {true,
          fmt("coverage %.4f (se %.4f), mean samples %.3f", cov, se,
              mean_samples)};
}

// --- 9. adaptive allocation beats uniform allocation on a heavy tail -------

outcome criterion_adaptive_efficiency() {
  campaign_config cfg;
  cfg.distribution = difficulty_distribution::heavy_tail(0.7, 0.5);
  cfg.policies = {stopping_policy::camd(0.05),  stopping_policy::fixed_n(1),
                  stopping_policy::fixed_n(2),  stopping_policy::fixed_n(4),
                  stopping_policy::fixed_n(8),  stopping_policy::fixed_n(16),
                  stopping_policy::fixed_n(32)};
  cfg.num_instances = 10000;
  cfg.batch_size = 2;
  // Adaptive arm capped at the largest fixed baseline; wrong candidates
  // scatter across 15 distinct answers.
  cfg.max_samples = 32;
  cfg.seed = 99001;
  cfg.dedup_threshold = 0.999;
  cfg.cluster_threshold = 0.85;
  cfg.synthetic.separation_threshold = 0.85;
  cfg.embedding_dim = 16;
  cfg.archetypes = 16;
  cfg.threads = 1;

  const auto report = run_policy_comparison(cfg);

  const policy_summary* camd_row = nullptr;
  std::vector<const policy_summary*> fixed_rows;
  for (const auto& s : report.summaries) {
    if (s.policy.rfind("camd", 0) == 0)
      camd_row = &s;
    else
      fixed_rows.push_back(&s);
  }
  const double m = camd_row->mean_samples;

  const policy_summary* lo = nullptr;
  const policy_summary* hi = nullptr;
  for (const auto* f : fixed_rows) {
    if (f->mean_samples <= m &&
        (lo == nullptr || f->mean_samples > lo->mean_samples))
      lo = f;
    if (f->mean_samples >= m &&
        (hi == nullptr || f->mean_samples < hi->mean_samples))
      hi = f;
  }
  if (lo == nullptr) lo = hi;
  if (hi == nullptr) hi = lo;
  double matched_cov, matched_se;
  if (lo == hi) {
    matched_cov = lo->coverage;
    matched_se = lo->coverage_se;
  } else {
    const double w =
        (m - lo->mean_samples) / (hi->mean_samples - lo->mean_samples);
    matched_cov = (1.0 - w) * lo->coverage + w * hi->coverage;
    matched_se = std::max(lo->coverage_se, hi->coverage_se);
  }

  // Per-instance samples on the easy subpopulation.
  double easy_sum = 0.0;
  long long easy_n = 0;
  for (const auto& r : report.records) {
    if (r.policy.rfind("camd", 0) != 0 || r.true_s < 0.8) continue;
    easy_sum += static_cast<double>(r.samples_used);
    ++easy_n;
  }
  const double easy_mean = easy_sum / static_cast<double>(easy_n);

  if (camd_row->coverage < matched_cov - matched_se)
    return {false, fmt("coverage %.4f < matched fixed %.4f - se %.4f",
                       camd_row->coverage, matched_cov, matched_se)};
  if (easy_mean > 0.4 * 8.0)
    return {false, fmt("easy-subpop mean samples %.3f > 3.2 (n=%g)",
                       easy_mean, static_cast<double>(easy_n))};
  return {true, fmt("coverage %.4f vs matched %.4f at %.2f samples",
                    camd_row->coverage, matched_cov, m) +
                    fmt("; easy mean %.3f <= 3.2 (n=%g)", easy_mean,
                        static_cast<double>(easy_n))};
}

// --- 10. pinned-seed campaign reruns byte-identically -----------------------

outcome criterion_determinism() {
#ifdef CAMD_CI_CONFIG
  const auto cfg = load_campaign_file(CAMD_CI_CONFIG);
#else
  const auto cfg = load_campaign_file("configs/ci.ini");
#endif
  const auto first = run_policy_comparison(cfg, run_profile::ci);
  const auto second = run_policy_comparison(cfg, run_profile::ci);
  const auto csv1 = records_to_csv(first.records);
  const auto csv2 = records_to_csv(second.records);
  if (csv1 != csv2) return {false, "records CSV differs between reruns"};

  const auto t1 = theory_to_csv(run_theory_suite(cfg, run_profile::ci));
  const auto t2 = theory_to_csv(run_theory_suite(cfg, run_profile::ci));
  if (t1 != t2) return {false, "theory CSV differs between reruns"};

  auto threaded = cfg;
  threaded.threads = 4;
  const auto parallel = run_policy_comparison(threaded, run_profile::ci);
  if (records_to_csv(parallel.records) != csv1)
    return {false, "records CSV depends on the thread count"};
  return {true, fmt("records (%g bytes) and theory (%g bytes) byte-stable",
                    static_cast<double>(csv1.size()),
                    static_cast<double>(t1.size()))};
}

struct entry {
  int id;
  const char* name;
  double limit_s;
  outcome (*fn)();
};

const entry kEntries[] = {
    {1, "delta-coverage sizes are exactly minimal", 1.0,
     criterion_delta_coverage},
    {2, "uniform-difficulty residual closed form", 1.0,
     criterion_uniform_residual},
    {3, "heavy-tail polynomial decay slope", 60.0, criterion_heavy_tail_slope},
    {4, "bounded-difficulty geometric decay", 30.0,
     criterion_light_tail_slope},
    {5, "stretched-exponential decay exponent", 120.0,
     criterion_stretched_slope},
    {6, "sequential equals one-shot posterior update", 5.0,
     criterion_conjugacy},
    {7, "scoring algebra invariances", 5.0, criterion_scoring_algebra},
    {8, "adaptive rule coverage at near-oracle cost", 60.0,
     criterion_controller_coverage},
    {9, "adaptive beats uniform allocation on heavy tails", 300.0,
     criterion_adaptive_efficiency},
    {10, "pinned-seed campaign determinism", 120.0, criterion_determinism},
};

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--criterion") == 0 && i + 1 < argc) {
      only = std::atoi(argv[i + 1]);
      ++i;
    } else {
      std::fprintf(stderr, "usage: %s [--criterion N]\n", argv[0]);
      return 2;
    }
  }

  bool all_pass = true;
  for (const auto& e : kEntries) {
    if (only != 0 && e.id != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    outcome o;
    try {
      o = e.fn();
    } catch (const std::exception& ex) {
      o = {false, std::string("exception: ") + ex.what()};
    }
    const double dt =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    bool ok = o.pass;
    std::string detail = o.detail;
    if (dt > e.limit_s) {
      ok = false;
      detail += fmt(" [over time budget: %.1fs > %.0fs]", dt, e.limit_s);
    }
    std::printf("%s criterion %d: %s (%s) [%.2fs/%.0fs]\n",
                ok ? "PASS" : "FAIL", e.id, e.name, detail.c_str(), dt,
                e.limit_s);
    std::fflush(stdout);
    all_pass = all_pass && ok;
  }
  return all_pass ? 0 : 1;
}
