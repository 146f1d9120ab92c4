#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "camd/candidate.hpp"
#include "camd/clustering.hpp"
#include "camd/errors.hpp"
#include "camd/scoring.hpp"

namespace camd {

enum class stop_reason {
  coverage_reached,
  budget_exhausted,
  no_improvement,
  ei_below_cost,
};

inline const char* to_string(stop_reason r) {
  switch (r) {
    case stop_reason::coverage_reached: return "coverage_reached";
    case stop_reason::budget_exhausted: return "budget_exhausted";
    case stop_reason::no_improvement: return "no_improvement";
    default: return "ei_below_cost";
  }
}

struct stopping_policy {
  enum class kind {
    camd,
    threshold,
    beta_bernoulli,
    expected_improvement,
    fixed_n,
  };
  kind rule = kind::camd;
  double delta = 0.05;          // camd
  double score_target = 0.0;    // threshold
  int patience = 3;             // threshold, counted in samples
  double a0 = 1.0, b0 = 1.0;    // beta_bernoulli prior
  double gain_floor = 0.01;     // beta_bernoulli
  double cost_per_token = 0.0;  // expected_improvement
  long long n_fixed = 8;        // fixed_n

  static stopping_policy camd(double delta = 0.05) {
    stopping_policy p;
    p.rule = kind::camd;
    p.delta = delta;
    return p;
  }
  static stopping_policy threshold(double target, int patience = 3) {
    stopping_policy p;
    p.rule = kind::threshold;
    p.score_target = target;
    p.patience = patience;
    return p;
  }
  static stopping_policy beta_bernoulli(double a0 = 1.0, double b0 = 1.0,
                                        double gain_floor = 0.01) {
    stopping_policy p;
    p.rule = kind::beta_bernoulli;
    p.a0 = a0;
    p.b0 = b0;
    p.gain_floor = gain_floor;
    return p;
  }
  static stopping_policy expected_improvement(double cost_per_token) {
    stopping_policy p;
    p.rule = kind::expected_improvement;
    p.cost_per_token = cost_per_token;
    return p;
  }
  static stopping_policy fixed_n(long long n) {
    stopping_policy p;
    p.rule = kind::fixed_n;
    p.n_fixed = n;
    return p;
  }

  void validate() const {
    if (rule == kind::camd && !(delta > 0.0 && delta < 1.0))
      throw parameter_domain_error("camd policy: delta must lie in (0,1)");
    if (rule == kind::threshold && patience < 1)
      throw parameter_domain_error("threshold policy: patience must be >= 1");
    if (rule == kind::beta_bernoulli && !(a0 > 0.0 && b0 > 0.0))
      throw parameter_domain_error("beta_bernoulli policy: prior must be > 0");
    if (rule == kind::expected_improvement && cost_per_token < 0.0)
      throw parameter_domain_error("ei policy: cost must be >= 0");
    if (rule == kind::fixed_n && n_fixed < 1)
      throw parameter_domain_error("fixed_n policy: n must be >= 1");
  }
};

struct controller_config {
  scoring_options scoring;
  double dedup_threshold = 0.9;
  double cluster_threshold = 0.85;
  double prior_concentration = 1.0;
  int batch_size = 2;
  long long max_samples = 64;
};

struct controller_state {
  std::vector<double> alpha;
  std::vector<double> soft_counts;
  // Pool index of each cluster's representative; carries identity across
  // re-clusterings so concentration mass can follow the clusters.
  std::vector<std::size_t> cluster_representatives;
  double prior_concentration = 1.0;
  int round = 0;
  long long samples_used = 0;
  long long tokens_used = 0;
  bool stopped = false;
  stop_reason reason = stop_reason::budget_exhausted;
  double last_p_star = 0.0;

  // Threshold-policy trackers: best raw combined score seen and how many
  // consecutive samples failed to improve it.
  double best_raw_score = -std::numeric_limits<double>::infinity();
  int stale_samples = 0;

  // Beta-Bernoulli tracker: posterior over "new sample joins the leader".
  double bb_a = 1.0, bb_b = 1.0;
  double bb_prev_mean = 0.5;
};

struct step_decision {
  bool stop = false;
  stop_reason reason = stop_reason::budget_exhausted;
  int next_batch = 0;                 // when continuing
  std::string final_answer;           // when stopped
  std::size_t final_answer_index = 0; // pool index of the chosen answer
};

struct ei_result {
  double gain = 0.0;
  bool stop = false;
};

inline controller_state init_state(std::size_t num_clusters,
                                   double prior_concentration = 1.0) {
  if (num_clusters < 1)
    throw parameter_domain_error("init_state: need at least one cluster");
  if (!(prior_concentration > 0.0))
    throw parameter_domain_error(
        "init_state: prior concentration must be > 0");
  controller_state st;
  st.alpha.assign(num_clusters, prior_concentration);
  st.soft_counts.assign(num_clusters, 0.0);
  st.prior_concentration = prior_concentration;
  return st;
}

inline std::vector<double> posterior_mean(const controller_state& st) {
  if (st.alpha.empty())
    throw empty_input_error("posterior_mean: uninitialized state");
  std::vector<double> mean(st.alpha.size());
  double z = 0.0;
  for (std::size_t k = 0; k < st.alpha.size(); ++k) {
    mean[k] = st.alpha[k] + st.soft_counts[k];
    z += mean[k];
  }
  for (double& m : mean) m /= z;
  return mean;
}

/// Conjugate soft-count update. `stilde` is indexed by pool position; only
/// cluster members contribute. When the clustering changed shape since the
/// last update, each old cluster's excess mass (alpha_k - alpha0 + n_k)
/// follows its representative into the new cluster holding it; fresh
/// clusters start at the prior.
inline controller_state update_posterior(controller_state st,
                                         const cluster_set& cs,
                                         const std::vector<double>& stilde) {
  const std::size_t m = cs.clusters.size();
  if (m == 0) throw empty_input_error("update_posterior: empty cluster set");

  if (st.alpha.empty() || st.cluster_representatives.empty()) {
    if (!st.alpha.empty() && st.alpha.size() != m)
      throw shape_error("update_posterior: state has " +
                        std::to_string(st.alpha.size()) +
                        " clusters, clustering has " + std::to_string(m));
    st.alpha.assign(m, st.prior_concentration);
    st.soft_counts.assign(m, 0.0);
  } else {
    // Remap previous mass through representatives.
    std::vector<double> carried(m, 0.0);
    for (std::size_t k = 0; k < st.alpha.size(); ++k) {
      const std::size_t rep = st.cluster_representatives[k];
      long long target = -1;
      for (std::size_t j = 0; j < m; ++j) {
        const auto& mem = cs.clusters[j].members;
        if (std::find(mem.begin(), mem.end(), rep) != mem.end()) {
          target = static_cast<long long>(j);
          break;
        }
      }
      if (target < 0)
        throw shape_error(
            "update_posterior: old representative missing from new "
            "clustering");
      carried[static_cast<std::size_t>(target)] +=
          st.alpha[k] - st.prior_concentration + st.soft_counts[k];
    }
    st.alpha.assign(m, st.prior_concentration);
    st.soft_counts = carried;
  }

  for (std::size_t j = 0; j < m; ++j) {
    double batch = 0.0;
    for (std::size_t i : cs.clusters[j].members) {
      if (i >= stilde.size())
        throw shape_error("update_posterior: weight index out of range");
      batch += stilde[i];
    }
    st.soft_counts[j] += batch;
  }
  st.cluster_representatives.clear();
  for (const auto& c : cs.clusters)
    st.cluster_representatives.push_back(c.representative);
  return st;
}

/// p'(y) = sum_k pi_k q_k(y) over a shared vocabulary.
inline std::vector<double> mixture_token_distribution(
    const controller_state& st,
    const std::vector<std::vector<double>>& cluster_dists) {
  if (cluster_dists.size() != st.alpha.size())
    throw shape_error("mixture: one token distribution per cluster");
  const auto pi = posterior_mean(st);
  const std::size_t vocab = cluster_dists.front().size();
  std::vector<double> out(vocab, 0.0);
  for (std::size_t k = 0; k < cluster_dists.size(); ++k) {
    const auto& q = cluster_dists[k];
    if (q.size() != vocab)
      throw shape_error("mixture: vocabulary sizes differ");
    double sum = 0.0;
    for (double v : q) sum += v;
    if (std::abs(sum - 1.0) > 1e-9)
      throw normalization_error("mixture: cluster distribution sums to " +
                                std::to_string(sum));
    for (std::size_t y = 0; y < vocab; ++y) out[y] += pi[k] * q[y];
  }
  return out;
}

/// Add-eps-smoothed byte frequency over the cluster members' answer texts;
/// the desk-scale stand-in for a per-cluster next-token distribution.
inline std::vector<double> empirical_token_distribution(
    const std::vector<candidate>& pool, const cluster& c,
    double eps = 1e-6) {
  std::vector<double> freq(256, eps);
  double total = 256.0 * eps;
  for (std::size_t i : c.members) {
    if (i >= pool.size())
      throw shape_error("empirical_token_distribution: index out of range");
    for (unsigned char byte : pool[i].answer_text) {
      freq[byte] += 1.0;
      total += 1.0;
    }
  }
  for (double& f : freq) f /= total;
  return freq;
}

/// Gain heuristic: probability the next sample changes the answer, scaled by
/// the leader's confidence mass. Stops when the gain no longer pays for the
/// expected tokens.
inline ei_result ei_estimate(const controller_state& st, double cost_per_token,
                             double expected_tokens) {
  if (cost_per_token < 0.0 || expected_tokens < 0.0)
    throw parameter_domain_error("ei_estimate: costs must be >= 0");
  const auto pi = posterior_mean(st);
  const double pi_max = *std::max_element(pi.begin(), pi.end());
  ei_result r;
  r.gain = (1.0 - st.last_p_star) * pi_max;
  r.stop = r.gain < cost_per_token * expected_tokens;
  return r;
}

/// One instance's controller loop: pools candidates, rescores and
/// re-clusters each round, maintains the Dirichlet posterior, and applies
/// the stopping policy.
class adaptive_controller {
 public:
  adaptive_controller(stopping_policy policy, controller_config cfg,
                      const evidence_context* ctx = nullptr)
      : policy_(policy), cfg_(cfg), ctx_(ctx) {
    policy_.validate();
    if (cfg_.batch_size < 1)
      throw parameter_domain_error("controller: batch_size must be >= 1");
    if (cfg_.max_samples < 1)
      throw parameter_domain_error("controller: max_samples must be >= 1");
    state_.prior_concentration = cfg_.prior_concentration;
    if (!(cfg_.prior_concentration > 0.0))
      throw parameter_domain_error(
          "controller: prior concentration must be > 0");
    state_.bb_a = policy_.a0;
    state_.bb_b = policy_.b0;
    state_.bb_prev_mean = policy_.a0 / (policy_.a0 + policy_.b0);
  }

  const controller_state& state() const { return state_; }
  const cluster_set& clusters() const { return clusters_; }
  const std::vector<candidate>& pool() const { return pool_; }

  long long sample_budget() const {
    return policy_.rule == stopping_policy::kind::fixed_n
               ? std::min(policy_.n_fixed, cfg_.max_samples)
               : cfg_.max_samples;
  }

  int requested_batch() const {
    const long long remaining = sample_budget() - state_.samples_used;
    return static_cast<int>(
        std::max<long long>(0, std::min<long long>(cfg_.batch_size, remaining)));
  }

  step_decision step(const std::vector<candidate>& new_candidates) {
    if (state_.stopped)
      throw parameter_domain_error("controller: step after stop");
    if (pool_.empty() && new_candidates.empty())
      throw budget_error("controller: budget exhausted before any candidate",
                         "");

    ingest(new_candidates);
    evaluate_pool();
    state_ = update_posterior(std::move(state_), clusters_, stilde_);
    state_.round += 1;
    state_.last_p_star = clusters_.p_star;

    const step_decision d = decide(new_candidates.size());
    last_decision_ = d;
    if (d.stop) {
      state_.stopped = true;
      state_.reason = d.reason;
    }
    return d;
  }

  /// Representative of the argmax-weight cluster.
  std::size_t best_answer_index() const {
    if (clusters_.clusters.empty())
      throw empty_input_error("controller: nothing evaluated yet");
    return clusters_.clusters[clusters_.p_star_index].representative;
  }

  nlohmann::json round_log_entry() const {
    nlohmann::json j{{"round", state_.round},
                     {"p_star", state_.last_p_star},
                     {"pi_bar", posterior_mean(state_)},
                     {"samples_used", state_.samples_used},
                     {"tokens_used", state_.tokens_used},
                     {"decision", last_decision_.stop ? "stop" : "continue"}};
    if (last_decision_.stop)
      j["reason"] = to_string(last_decision_.reason);
    else
      j["batch"] = last_decision_.next_batch;
    return j;
  }

 private:
  void ingest(const std::vector<candidate>& new_candidates) {
    for (const auto& c : new_candidates) {
      validate_candidate(c);
      const double raw = combine_scores(
          score_generation(c), ctx_ ? score_alignment(c, *ctx_) : 0.0,
          score_coherence(c), cfg_.scoring.lambda_g, cfg_.scoring.lambda_c);
      pool_.push_back(c);
      raw_combined_.push_back(raw);
      state_.samples_used += 1;
      state_.tokens_used += static_cast<long long>(c.token_count());
      track_threshold_sample(raw);
    }
  }

  void track_threshold_sample(double raw) {
    if (raw > state_.best_raw_score + 1e-12) {
      state_.best_raw_score = raw;
      state_.stale_samples = 0;
    } else {
      state_.stale_samples += 1;
    }
  }

  void evaluate_pool() {
    retained_ = deduplicate(pool_, cfg_.dedup_threshold);
    std::vector<candidate> active;
    active.reserve(retained_.size());
    for (std::size_t i : retained_) active.push_back(pool_[i]);
    const auto scored = score_candidates(active, ctx_, cfg_.scoring);

    combined_.assign(pool_.size(), 0.0);
    stilde_.assign(pool_.size(), 0.0);
    for (std::size_t a = 0; a < retained_.size(); ++a) {
      combined_[retained_[a]] = scored[a].combined;
      stilde_[retained_[a]] = scored[a].normalized_weight;
    }
    clusters_ = posterior_weights(
        cluster_candidates(pool_, retained_, combined_,
                           cfg_.cluster_threshold, state_.round),
        combined_);
  }

  step_decision decide(std::size_t batch_arrived) {
    step_decision d;
    const std::size_t best = best_answer_index();

    const auto stop_with = [&](stop_reason r) {
      d.stop = true;
      d.reason = r;
      d.final_answer = pool_[best].answer_text;
      d.final_answer_index = best;
      return d;
    };

    switch (policy_.rule) {
      case stopping_policy::kind::camd:
        if (should_stop(clusters_.p_star, policy_.delta))
          return stop_with(stop_reason::coverage_reached);
        break;
      case stopping_policy::kind::threshold:
        if (state_.best_raw_score >= policy_.score_target)
          return stop_with(stop_reason::coverage_reached);
        if (state_.stale_samples >= policy_.patience)
          return stop_with(stop_reason::no_improvement);
        break;
      case stopping_policy::kind::beta_bernoulli: {
        update_beta_bernoulli(batch_arrived);
        const double mean = state_.bb_a / (state_.bb_a + state_.bb_b);
        const double gain = std::abs(mean - state_.bb_prev_mean);
        state_.bb_prev_mean = mean;
        if (state_.round > 1 && gain < policy_.gain_floor)
          return stop_with(stop_reason::no_improvement);
        break;
      }
      case stopping_policy::kind::expected_improvement: {
        const double expected_tokens =
            state_.samples_used > 0
                ? static_cast<double>(state_.tokens_used) /
                      static_cast<double>(state_.samples_used)
                : 0.0;
        const auto ei =
            ei_estimate(state_, policy_.cost_per_token, expected_tokens);
        if (ei.stop) return stop_with(stop_reason::ei_below_cost);
        break;
      }
      case stopping_policy::kind::fixed_n:
        if (state_.samples_used >= sample_budget())
          return stop_with(stop_reason::budget_exhausted);
        break;
    }

    if (state_.samples_used >= sample_budget())
      return stop_with(stop_reason::budget_exhausted);

    d.stop = false;
    d.next_batch = requested_batch();
    return d;
  }

  void update_beta_bernoulli(std::size_t batch_arrived) {
    // Success: a new sample's cluster is the current leading cluster.
    const std::size_t first_new = pool_.size() - batch_arrived;
    for (std::size_t i = first_new; i < pool_.size(); ++i) {
      long long own = -1;
      for (std::size_t k = 0; k < clusters_.clusters.size(); ++k) {
        const auto& mem = clusters_.clusters[k].members;
        if (std::find(mem.begin(), mem.end(), i) != mem.end()) {
          own = static_cast<long long>(k);
          break;
        }
      }
      // Dedup-dropped samples belong to their duplicate's cluster for
      // success accounting; find the retained candidate they collapsed into.
      if (own < 0) own = find_collapsed_cluster(i);
      const bool success =
          own == static_cast<long long>(clusters_.p_star_index);
      if (success)
        state_.bb_a += 1.0;
      else
        state_.bb_b += 1.0;
    }
  }

  long long find_collapsed_cluster(std::size_t pool_index) const {
    // The dropped candidate duplicates some retained one; attribute it to
    // the nearest retained candidate's cluster.
    double best_sim = -2.0;
    std::size_t best_idx = retained_.empty() ? 0 : retained_.front();
    const auto emb = answer_embedding(pool_[pool_index]);
    for (std::size_t r : retained_) {
      if (r == pool_index) continue;
      const double sim = detail::dot(emb, answer_embedding(pool_[r]));
      if (sim > best_sim) {
        best_sim = sim;
        best_idx = r;
      }
    }
    for (std::size_t k = 0; k < clusters_.clusters.size(); ++k) {
      const auto& mem = clusters_.clusters[k].members;
      if (std::find(mem.begin(), mem.end(), best_idx) != mem.end())
        return static_cast<long long>(k);
    }
    return 0;
  }

  stopping_policy policy_;
  controller_config cfg_;
  const evidence_context* ctx_;
  controller_state state_;
  std::vector<candidate> pool_;
  std::vector<double> raw_combined_;
  std::vector<double> combined_;
  std::vector<double> stilde_;
  std::vector<std::size_t> retained_;
  cluster_set clusters_;
  step_decision last_decision_;
};

}  // namespace camd
