#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "camd/config.hpp"
#include "camd/controller.hpp"
#include "camd/coverage.hpp"
#include "camd/errors.hpp"
#include "camd/stats.hpp"
#include "camd/synthetic.hpp"

namespace camd {

enum class run_profile { full, ci };

inline run_profile parse_profile(const std::string& name) {
  if (name == "full") return run_profile::full;
  if (name == "ci") return run_profile::ci;
  throw config_error("profile must be 'ci' or 'full', got '" + name + "'");
}

/// Shrinks campaign sizes so a pinned-seed run finishes in CI time.
inline campaign_config scaled_for(campaign_config cfg, run_profile profile) {
  if (profile == run_profile::ci) {
    cfg.num_instances = std::min<long long>(cfg.num_instances, 50);
    cfg.theory_instances = std::min<long long>(cfg.theory_instances, 20000);
  }
  return cfg;
}

struct experiment_record {
  std::string instance_id;
  std::string policy;
  double true_s = 0.0;
  long long samples_used = 0;
  long long tokens_used = 0;
  int correct = 0;
  double p_star_final = 0.0;
  long long rounds = 0;
  std::string stop_reason;
  double wall_ms = 0.0;  // measured, never serialized: reports stay byte-stable
};

struct policy_summary {
  std::string policy;
  long long n = 0;
  double mean_samples = 0.0;
  double mean_tokens = 0.0;
  double coverage = 0.0;
  double coverage_se = 0.0;
  double mean_p_star = 0.0;
  bool pareto = false;
};

struct comparison_report {
  std::vector<experiment_record> records;
  std::vector<policy_summary> summaries;
};

/// Raised when a policy run fails mid-campaign; carries the finished rows so
/// the caller can flush them before exiting.
struct campaign_abort : std::runtime_error {
  campaign_abort(const std::string& msg, std::vector<experiment_record> done)
      : std::runtime_error(msg), partial(std::move(done)) {}
  std::vector<experiment_record> partial;
};

namespace detail {

inline std::string fmt9(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", x);
  return buf;
}

inline std::string instance_label(long long i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "inst-%06lld", i);
  return buf;
}

inline void sort_records(std::vector<experiment_record>& recs) {
  std::sort(recs.begin(), recs.end(),
            [](const experiment_record& a, const experiment_record& b) {
              if (a.policy != b.policy) return a.policy < b.policy;
              return a.instance_id < b.instance_id;
            });
}

}  // namespace detail

inline experiment_record run_single(const campaign_config& cfg,
                                    const stopping_policy& policy,
                                    const synthetic_instance& inst,
                                    const std::string& id,
                                    std::uint64_t call_seed) {
  synthetic_backend backend(cfg.synthetic);
  backend.register_instance(id, inst);
  const evidence_context ctx = backend.context(id);

  controller_config ccfg;
  ccfg.scoring = cfg.scoring;
  ccfg.dedup_threshold = cfg.dedup_threshold;
  ccfg.cluster_threshold = cfg.cluster_threshold;
  ccfg.prior_concentration = cfg.prior_concentration;
  ccfg.batch_size = static_cast<int>(cfg.batch_size);
  ccfg.max_samples = cfg.max_samples;
  adaptive_controller ctl(policy, ccfg, &ctx);

  const auto t0 = std::chrono::steady_clock::now();
  step_decision d;
  long long rounds = 0;
  do {
    const int batch = ctl.requested_batch();
    d = ctl.step(backend.generate(id, batch, call_seed));
    ++rounds;
  } while (!d.stop);
  const auto t1 = std::chrono::steady_clock::now();

  experiment_record rec;
  rec.instance_id = id;
  rec.policy = policy_label(policy);
  rec.true_s = inst.true_s;
  rec.samples_used = ctl.state().samples_used;
  rec.tokens_used = ctl.state().tokens_used;
  rec.correct = backend.answer_is_correct(id, d.final_answer) ? 1 : 0;
  rec.p_star_final = ctl.state().last_p_star;
  rec.rounds = rounds;
  rec.stop_reason = to_string(d.reason);
  rec.wall_ms =
      std::chrono::duration<double, std::milli>(t1 - t0).count();
  return rec;
}

/// Runs every policy over one shared instance set. Jobs fan out to a small
/// worker pool; each job is pure given its derived seed, so the records do
/// not depend on the thread count.
inline comparison_report run_policy_comparison(const campaign_config& cfg,
                                               run_profile profile =
                                                   run_profile::full) {
  const campaign_config run_cfg = scaled_for(cfg, profile);
  run_cfg.validate();
  if (run_cfg.policies.size() < 2)
    throw config_error("policy comparison needs >= 2 policies");
  if (run_cfg.backend_kind != "synthetic")
    throw unsupported_mode_error(
        "policy comparison needs ground-truth labels; only the synthetic "
        "backend provides them");

  std::vector<synthetic_instance> instances;
  instances.reserve(static_cast<std::size_t>(run_cfg.num_instances));
  for (long long i = 0; i < run_cfg.num_instances; ++i)
    instances.push_back(make_instance(run_cfg.distribution,
                                      run_cfg.embedding_dim,
                                      run_cfg.archetypes,
                                      derive_seed(run_cfg.seed, i),
                                      run_cfg.synthetic));

  struct job {
    std::size_t policy_idx;
    std::size_t inst_idx;
  };
  std::vector<job> jobs;
  for (std::size_t p = 0; p < run_cfg.policies.size(); ++p)
    for (std::size_t i = 0; i < instances.size(); ++i)
      jobs.push_back({p, i});

  std::vector<experiment_record> records(jobs.size());
  std::vector<char> done(jobs.size(), 0);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex fail_mu;
  std::string fail_msg;

  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size() || failed.load()) return;
      const auto& [p, i] = jobs[j];
      try {
        records[j] = run_single(run_cfg, run_cfg.policies[p], instances[i],
                                detail::instance_label(
                                    static_cast<long long>(i)),
                                derive_seed(run_cfg.seed, i));
        done[j] = 1;
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(fail_mu);
        if (fail_msg.empty())
          fail_msg = std::string("policy '") +
                     policy_label(run_cfg.policies[p]) + "' failed on " +
                     detail::instance_label(static_cast<long long>(i)) +
                     ": " + e.what();
        failed.store(true);
      }
    }
  };

  const long long want = std::min<long long>(
      run_cfg.threads, static_cast<long long>(jobs.size()));
  std::vector<std::thread> pool;
  for (long long t = 1; t < want; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  if (failed.load()) {
    std::vector<experiment_record> partial;
    for (std::size_t j = 0; j < jobs.size(); ++j)
      if (done[j]) partial.push_back(records[j]);
    detail::sort_records(partial);
    throw campaign_abort(fail_msg, std::move(partial));
  }

  comparison_report report;
  report.records = std::move(records);
  detail::sort_records(report.records);

  for (const auto& pol : run_cfg.policies) {
    const std::string label = policy_label(pol);
    policy_summary s;
    s.policy = label;
    for (const auto& r : report.records) {
      if (r.policy != label) continue;
      s.n += 1;
      s.mean_samples += static_cast<double>(r.samples_used);
      s.mean_tokens += static_cast<double>(r.tokens_used);
      s.coverage += r.correct;
      s.mean_p_star += r.p_star_final;
    }
    const auto n = static_cast<double>(s.n);
    s.mean_samples /= n;
    s.mean_tokens /= n;
    s.coverage /= n;
    s.mean_p_star /= n;
    s.coverage_se = std::sqrt(s.coverage * (1.0 - s.coverage) / n);
    report.summaries.push_back(std::move(s));
  }
  for (auto& a : report.summaries) {
    a.pareto = true;
    for (const auto& b : report.summaries) {
      if (&a == &b) continue;
      const bool no_worse =
          b.mean_tokens <= a.mean_tokens && b.coverage >= a.coverage;
      const bool strictly_better =
          b.mean_tokens < a.mean_tokens || b.coverage > a.coverage;
      if (no_worse && strictly_better) {
        a.pareto = false;
        break;
      }
    }
  }
  return report;
}

struct theory_row {
  std::string family;
  long long k = 0;
  double delta_hat = 0.0;
  double delta_theory = 0.0;
};

struct theory_fit {
  std::string family;
  std::string regime;
  double slope_hat = 0.0;
  double slope_theory = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
  double r2 = 0.0;
  long long n_instances = 0;
};

struct theory_report {
  std::vector<theory_row> rows;
  std::vector<theory_fit> fits;
};

namespace detail {

inline std::vector<long long> doubling_grid(long long k_min, long long k_max) {
  std::vector<long long> ks;
  for (long long k = std::max<long long>(1, k_min); k <= k_max; k *= 2)
    ks.push_back(k);
  if (ks.size() < 3)
    throw config_error("theory K grid needs at least three doubling steps");
  return ks;
}

}  // namespace detail

/// Estimates the residual curve for one family over a doubling K grid and
/// fits the regime-appropriate regression. Monte Carlo averages share one
/// difficulty sample across all K; the stretched family instead uses the
/// deterministic quadrature residual, whose relative Monte Carlo error would
/// otherwise explode with K.
inline theory_report run_theory_suite(const campaign_config& cfg,
                                      run_profile profile = run_profile::full) {
  const campaign_config run_cfg = scaled_for(cfg, profile);
  run_cfg.validate();
  if (run_cfg.backend_kind != "synthetic")
    throw unsupported_mode_error(
        "theory suite needs direct difficulty draws; only the synthetic "
        "backend provides them");

  std::vector<difficulty_distribution> families = run_cfg.theory_families;
  if (families.empty()) families.push_back(run_cfg.distribution);
  const auto ks = detail::doubling_grid(run_cfg.theory_k_min,
                                        run_cfg.theory_k_max);

  theory_report report;
  for (std::size_t f = 0; f < families.size(); ++f) {
    const auto& dist = families[f];
    const std::string family{dist.family_name()};

    std::vector<double> delta_hat(ks.size(), 0.0);
    long long n_used = 0;
    if (family == "stretched_exp") {
      for (std::size_t j = 0; j < ks.size(); ++j)
        delta_hat[j] = residual(dist, ks[j]);
    } else {
      const long long n = run_cfg.theory_instances;
      n_used = n;
      const std::uint64_t fam_seed =
          derive_seed(run_cfg.seed, 0xF00D + static_cast<std::uint64_t>(f));
      std::vector<double> s_draws(static_cast<std::size_t>(n));
      for (long long i = 0; i < n; ++i)
        s_draws[static_cast<std::size_t>(i)] =
            sample_difficulty(dist, derive_seed(fam_seed, i));
      for (std::size_t j = 0; j < ks.size(); ++j) {
        double acc = 0.0;
        for (const double s : s_draws)
          acc += detail::pow_one_minus(s, static_cast<double>(ks[j]));
        delta_hat[j] = acc / static_cast<double>(n);
      }
    }

    for (std::size_t j = 0; j < ks.size(); ++j)
      report.rows.push_back(
          {family, ks[j], delta_hat[j], residual(dist, ks[j])});

    std::vector<double> xs, ys;
    for (std::size_t j = 0; j < ks.size(); ++j) {
      if (!(delta_hat[j] > 0.0)) continue;
      const double kd = static_cast<double>(ks[j]);
      if (family == "heavy_tail" || family == "beta") {
        xs.push_back(std::log(kd));
        ys.push_back(std::log(delta_hat[j]));
      } else if (family == "stretched_exp") {
        xs.push_back(std::log(kd));
        ys.push_back(std::log(-std::log(delta_hat[j])));
      } else {
        xs.push_back(kd);
        ys.push_back(std::log(delta_hat[j]));
      }
    }
    const auto fit = fit_ols(xs, ys);

    theory_fit tf;
    tf.family = family;
    tf.n_instances = n_used;
    tf.slope_hat = fit.slope;
    tf.ci_lo = fit.ci95_lo();
    tf.ci_hi = fit.ci95_hi();
    tf.r2 = fit.r2;
    if (family == "heavy_tail") {
      tf.regime = "power_law";
      tf.slope_theory = -dist.get_if<heavy_tail_params>()->alpha;
    } else if (family == "beta") {
      tf.regime = "power_law";
      tf.slope_theory = -dist.get_if<beta_params>()->b;
    } else if (family == "stretched_exp") {
      tf.regime = "stretched_quadrature";
      const double theta = dist.get_if<stretched_exp_params>()->theta;
      tf.slope_theory = theta / (theta + 1.0);
    } else if (family == "light_truncated") {
      tf.regime = "geometric";
      tf.slope_theory =
          std::log1p(-dist.get_if<light_truncated_params>()->s_min);
    } else {
      tf.regime = "geometric";
      tf.slope_theory = std::log1p(-dist.get_if<point_mass_params>()->s);
    }
    report.fits.push_back(std::move(tf));
  }
  return report;
}

inline void write_text_file(const std::string& path,
                            const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot open for writing: " + path);
  out << body;
  out.flush();
  if (!out) throw io_error("write failed: " + path);
}

/// Per-instance rows in a fixed column order; floats at nine significant
/// digits so reruns are byte-identical.
inline std::string records_to_csv(const std::vector<experiment_record>& recs) {
  if (recs.empty()) throw empty_input_error("no records to report");
  std::ostringstream os;
  os << "instance_id,policy,true_s,samples_used,tokens_used,correct,"
        "p_star_final,rounds,stop_reason\n";
  for (const auto& r : recs) {
    os << r.instance_id << ',' << r.policy << ',' << detail::fmt9(r.true_s)
       << ',' << r.samples_used << ',' << r.tokens_used << ',' << r.correct
       << ',' << detail::fmt9(r.p_star_final) << ',' << r.rounds << ','
       << r.stop_reason << '\n';
  }
  return os.str();
}

inline std::string records_to_json(const std::vector<experiment_record>& recs) {
  if (recs.empty()) throw empty_input_error("no records to report");
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : recs)
    arr.push_back({{"instance_id", r.instance_id},
                   {"policy", r.policy},
                   {"true_s", r.true_s},
                   {"samples_used", r.samples_used},
                   {"tokens_used", r.tokens_used},
                   {"correct", r.correct},
                   {"p_star_final", r.p_star_final},
                   {"rounds", r.rounds},
                   {"stop_reason", r.stop_reason}});
  return arr.dump(2) + "\n";
}

inline std::string summary_markdown(const comparison_report& report) {
  std::ostringstream os;
  os << "| policy | n | mean_samples | mean_tokens | coverage | se | "
        "mean_p_star | pareto |\n";
  os << "|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : report.summaries) {
    os << "| " << s.policy << " | " << s.n << " | "
       << detail::fmt9(s.mean_samples) << " | " << detail::fmt9(s.mean_tokens)
       << " | " << detail::fmt9(s.coverage) << " | "
       << detail::fmt9(s.coverage_se) << " | " << detail::fmt9(s.mean_p_star)
       << " | " << (s.pareto ? "yes" : "no") << " |\n";
  }
  return os.str();
}

inline std::string theory_to_csv(const theory_report& report) {
  if (report.rows.empty()) throw empty_input_error("no theory rows to report");
  std::ostringstream os;
  os << "family,k,delta_hat,delta_theory\n";
  for (const auto& r : report.rows)
    os << r.family << ',' << r.k << ',' << detail::fmt9(r.delta_hat) << ','
       << detail::fmt9(r.delta_theory) << '\n';
  return os.str();
}

inline std::string theory_fits_markdown(const theory_report& report) {
  std::ostringstream os;
  os << "| family | regime | slope_hat | slope_theory | ci95 | r2 |\n";
  os << "|---|---|---|---|---|---|\n";
  for (const auto& f : report.fits)
    os << "| " << f.family << " | " << f.regime << " | "
       << detail::fmt9(f.slope_hat) << " | " << detail::fmt9(f.slope_theory)
       << " | [" << detail::fmt9(f.ci_lo) << ", " << detail::fmt9(f.ci_hi)
       << "] | " << detail::fmt9(f.r2) << " |\n";
  return os.str();
}

/// Writes records in the requested format and prints the summary table.
inline std::string emit_report(const comparison_report& report,
                               const std::string& format,
                               const std::string& out_path,
                               std::ostream& summary_out = std::cout) {
  if (format != "csv" && format != "json")
    throw config_error("report format must be csv or json, got '" + format +
                       "'");
  const std::string body = format == "csv" ? records_to_csv(report.records)
                                           : records_to_json(report.records);
  write_text_file(out_path, body);
  summary_out << summary_markdown(report);
  return out_path;
}

}  // namespace camd
