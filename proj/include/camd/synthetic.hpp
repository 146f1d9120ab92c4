#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "camd/backend.hpp"
#include "camd/candidate.hpp"
#include "camd/difficulty.hpp"
#include "camd/errors.hpp"
#include "camd/rng.hpp"

namespace camd {

/// Calibration knobs for the generative model. Log-prob means keep the
/// generation score informative but imperfect; context_noise and the
/// coherence step sizes set how much alignment and coherence each reveal.
struct synthetic_config {
  double noise_scale = 0.1;
  double logprob_mean_correct = -0.5;
  double logprob_mean_incorrect = -1.5;
  double logprob_spread = 0.3;
  double context_noise = 0.3;
  double coherence_step_correct = 0.15;
  double coherence_step_incorrect = 0.6;
  double irr_rate = 0.0;
  double separation_threshold = 0.85;
  long long tokens_per_candidate = 4;

  void validate() const {
    if (!(noise_scale >= 0.0))
      throw parameter_domain_error("synthetic_config: noise_scale must be >= 0");
    if (!(logprob_spread >= 0.0))
      throw parameter_domain_error(
          "synthetic_config: logprob_spread must be >= 0");
    if (!(context_noise >= 0.0))
      throw parameter_domain_error(
          "synthetic_config: context_noise must be >= 0");
    if (!(coherence_step_correct >= 0.0) || !(coherence_step_incorrect >= 0.0))
      throw parameter_domain_error(
          "synthetic_config: coherence steps must be >= 0");
    if (!(irr_rate >= 0.0) || !(irr_rate <= 1.0))
      throw parameter_domain_error(
          "synthetic_config: irr_rate must be in [0, 1]");
    if (!(separation_threshold > 0.0) || !(separation_threshold < 1.0))
      throw parameter_domain_error(
          "synthetic_config: separation_threshold must be in (0, 1)");
    if (tokens_per_candidate < 1)
      throw parameter_domain_error(
          "synthetic_config: tokens_per_candidate must be >= 1");
  }
};

/// One synthetic problem: a latent per-trial success probability plus one
/// unit archetype direction per distinct answer. Archetypes are pairwise
/// separated below the clustering threshold so clusters are resolvable by
/// construction. irr_flag marks an unresolvable instance: no candidate is
/// ever correct.
struct synthetic_instance {
  double true_s = 0.0;
  std::vector<std::vector<double>> answer_archetypes;
  std::size_t correct_index = 0;
  long long embedding_dim = 0;
  double noise_scale = 0.1;
  bool irr_flag = false;
  std::uint64_t stream_seed = 0;
  evidence_context context;
};

/// Candidates plus harness-side ground truth in parallel arrays. The labels
/// never appear inside the candidate records themselves.
struct generated_batch {
  std::vector<candidate> candidates;
  std::vector<int> correct;
  std::vector<std::size_t> archetype;
};

namespace detail {

inline std::vector<double> gaussian_vec(std::mt19937_64& rng, long long dim) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = g(rng);
  return v;
}

inline void normalize_in_place(std::vector<double>& v) {
  const double n = norm(v);
  if (!(n > 0.0) || !std::isfinite(n))
    throw degenerate_vector_error("cannot normalize a zero vector");
  for (double& x : v) x /= n;
}

inline std::vector<double> perturbed_unit(const std::vector<double>& base,
                                          double scale,
                                          std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<double> v = base;
  for (double& x : v) x += scale * g(rng);
  normalize_in_place(v);
  return v;
}

/// Orthonormal archetype set via modified Gram-Schmidt; k > dim cannot
/// yield k mutually separated unit vectors this way.
inline std::vector<std::vector<double>> draw_archetypes(long long dim,
                                                        long long k,
                                                        std::mt19937_64& rng) {
  if (k > dim)
    throw dimensionality_error("cannot separate " + std::to_string(k) +
                               " archetypes in " + std::to_string(dim) +
                               " dimensions");
  std::vector<std::vector<double>> arch;
  arch.reserve(static_cast<std::size_t>(k));
  int retries = 0;
  while (arch.size() < static_cast<std::size_t>(k)) {
    std::vector<double> v = gaussian_vec(rng, dim);
    for (const auto& u : arch) {
      const double d = dot(v, u);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= d * u[i];
    }
    const double n = norm(v);
    if (n < 1e-8) {
      if (++retries > 64)
        throw dimensionality_error(
            "archetype draw degenerate after repeated retries");
      continue;
    }
    for (double& x : v) x /= n;
    arch.push_back(std::move(v));
  }
  return arch;
}

}  // namespace detail

inline void validate_instance(const synthetic_instance& inst,
                              double cluster_threshold) {
  if (inst.answer_archetypes.size() < 2)
    throw parameter_domain_error("instance needs at least two archetypes");
  if (!(inst.true_s >= 0.0) || !(inst.true_s <= 1.0))
    throw parameter_domain_error("instance true_s must be in [0, 1]");
  if (!inst.irr_flag && inst.correct_index >= inst.answer_archetypes.size())
    throw parameter_domain_error("instance correct_index out of range");
  const double margin = cluster_threshold - 0.05;
  for (std::size_t i = 0; i < inst.answer_archetypes.size(); ++i)
    for (std::size_t j = i + 1; j < inst.answer_archetypes.size(); ++j)
      if (detail::cosine(inst.answer_archetypes[i],
                         inst.answer_archetypes[j]) >= margin)
        throw parameter_domain_error(
            "archetypes are not separated below the clustering threshold");
}

inline synthetic_instance make_instance(const difficulty_distribution& dist,
                                        long long dim, long long k_archetypes,
                                        std::uint64_t seed,
                                        const synthetic_config& cfg = {}) {
  cfg.validate();
  if (dim < 2) throw parameter_domain_error("make_instance: dim must be >= 2");
  if (k_archetypes < 2)
    throw parameter_domain_error("make_instance: k_archetypes must be >= 2");

  auto rng = make_engine(derive_seed(seed, 0));
  synthetic_instance inst;
  inst.true_s = sample_difficulty(dist, derive_seed(seed, 1));
  inst.embedding_dim = dim;
  inst.noise_scale = cfg.noise_scale;
  inst.answer_archetypes = detail::draw_archetypes(dim, k_archetypes, rng);
  inst.correct_index = 0;
  inst.stream_seed = derive_seed(seed, 2);
  if (cfg.irr_rate > 0.0) {
    std::bernoulli_distribution irr(cfg.irr_rate);
    inst.irr_flag = irr(rng);
  }

  // Context features lean toward the correct archetype so alignment carries
  // signal; unresolvable instances get uninformative directions instead.
  const std::vector<double> anchor =
      inst.irr_flag ? [&] {
        auto v = detail::gaussian_vec(rng, dim);
        detail::normalize_in_place(v);
        return v;
      }()
                    : inst.answer_archetypes[inst.correct_index];
  inst.context.visual_features = {
      detail::perturbed_unit(anchor, cfg.context_noise, rng),
      detail::perturbed_unit(anchor, cfg.context_noise, rng)};
  inst.context.text_features = {
      detail::perturbed_unit(anchor, cfg.context_noise, rng)};

  validate_instance(inst, cfg.separation_threshold);
  return inst;
}

namespace detail {

inline candidate realize_candidate(const synthetic_instance& inst,
                                   const synthetic_config& cfg,
                                   std::uint64_t cand_seed, bool* out_correct,
                                   std::size_t* out_archetype) {
  auto rng = make_engine(cand_seed);
  std::normal_distribution<double> g(0.0, 1.0);

  bool correct = false;
  if (!inst.irr_flag && inst.true_s > 0.0) {
    std::bernoulli_distribution hit(inst.true_s);
    correct = hit(rng);
  }

  std::size_t arch_idx;
  if (correct) {
    arch_idx = inst.correct_index;
  } else {
    const std::size_t k = inst.answer_archetypes.size();
    std::vector<std::size_t> wrong;
    wrong.reserve(k);
    for (std::size_t j = 0; j < k; ++j)
      if (inst.irr_flag || j != inst.correct_index) wrong.push_back(j);
    std::uniform_int_distribution<std::size_t> pick(0, wrong.size() - 1);
    arch_idx = wrong[pick(rng)];
  }
  const auto& arch = inst.answer_archetypes[arch_idx];

  candidate c;
  c.answer_text = "answer-" + std::to_string(arch_idx);
  const auto L = static_cast<std::size_t>(cfg.tokens_per_candidate);

  const double lp_mean =
      correct ? cfg.logprob_mean_correct : cfg.logprob_mean_incorrect;
  c.token_logprobs.resize(L);
  for (double& lp : c.token_logprobs)
    lp = std::min(0.0, lp_mean + cfg.logprob_spread * g(rng));

  c.token_embeddings.resize(L);
  for (auto& e : c.token_embeddings) {
    e = arch;
    for (double& x : e) x += inst.noise_scale * g(rng);
    normalize_in_place(e);
  }

  const double step =
      correct ? cfg.coherence_step_correct : cfg.coherence_step_incorrect;
  c.hidden_states.resize(L);
  auto h = gaussian_vec(rng, inst.embedding_dim);
  normalize_in_place(h);
  for (std::size_t j = 0; j < L; ++j) {
    if (j > 0) {
      for (double& x : h) x += step * g(rng);
      normalize_in_place(h);
    }
    c.hidden_states[j] = h;
  }

  validate_candidate(c);
  if (out_correct) *out_correct = correct;
  if (out_archetype) *out_archetype = arch_idx;
  return c;
}

}  // namespace detail

/// Labeled generation for harness-side measurement. Candidate i of a given
/// (instance, seed) stream is a pure function of its stream index, so
/// prefixes agree across batch splits.
inline generated_batch generate_candidates(const synthetic_instance& inst,
                                           long long n, std::uint64_t seed,
                                           const synthetic_config& cfg = {},
                                           long long first_index = 0) {
  cfg.validate();
  if (n < 1)
    throw parameter_domain_error("generate_candidates: n must be >= 1");
  if (first_index < 0)
    throw parameter_domain_error(
        "generate_candidates: first_index must be >= 0");

  const std::uint64_t stream = derive_seed(inst.stream_seed, seed);
  generated_batch out;
  out.candidates.reserve(static_cast<std::size_t>(n));
  out.correct.reserve(static_cast<std::size_t>(n));
  out.archetype.reserve(static_cast<std::size_t>(n));
  for (long long i = 0; i < n; ++i) {
    bool correct = false;
    std::size_t arch = 0;
    out.candidates.push_back(detail::realize_candidate(
        inst, cfg,
        derive_seed(stream, static_cast<std::uint64_t>(first_index + i)),
        &correct, &arch));
    out.correct.push_back(correct ? 1 : 0);
    out.archetype.push_back(arch);
  }
  return out;
}

/// Fraction of trials in which at least one of n candidates is correct.
/// Draws only the correctness labels; the embedding machinery does not
/// change the ground-truth coverage.
inline double oracle_best_of_n(const synthetic_instance& inst, long long n,
                               long long trials, std::uint64_t seed) {
  if (n < 1) throw parameter_domain_error("oracle_best_of_n: n must be >= 1");
  if (trials < 1)
    throw parameter_domain_error("oracle_best_of_n: trials must be >= 1");
  if (inst.irr_flag || inst.true_s <= 0.0) return 0.0;

  long long hits = 0;
  for (long long t = 0; t < trials; ++t) {
    auto rng = make_engine(derive_seed(seed, static_cast<std::uint64_t>(t)));
    std::bernoulli_distribution hit(inst.true_s);
    for (long long i = 0; i < n; ++i) {
      if (hit(rng)) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(trials);
}

/// In-process backend over a registry of synthetic instances. Keeps one
/// stream cursor per instance so successive calls continue the same
/// candidate stream; a fresh backend replays it from the start.
class synthetic_backend : public candidate_backend {
 public:
  explicit synthetic_backend(synthetic_config cfg = {}) : cfg_(cfg) {
    cfg_.validate();
  }

  void register_instance(const std::string& id, synthetic_instance inst) {
    validate_instance(inst, cfg_.separation_threshold);
    instances_.insert_or_assign(id, std::move(inst));
    cursors_[id] = 0;
  }

  const synthetic_instance& instance(const std::string& id) const {
    return find(id);
  }

  bool answer_is_correct(const std::string& id,
                         const std::string& answer_text) const {
    const auto& inst = find(id);
    if (inst.irr_flag) return false;
    return answer_text == "answer-" + std::to_string(inst.correct_index);
  }

  generated_batch generate_labeled(const std::string& id, long long batch,
                                   std::uint64_t seed) {
    const auto& inst = find(id);
    long long& cursor = cursors_[id];
    generated_batch out = generate_candidates(inst, batch, seed, cfg_, cursor);
    cursor += batch;
    charge(batch);
    return out;
  }

  std::vector<candidate> generate(const std::string& id, long long batch,
                                  std::uint64_t seed) override {
    return generate_labeled(id, batch, seed).candidates;
  }

  evidence_context context(const std::string& id) override {
    return find(id).context;
  }

  const synthetic_config& config() const noexcept { return cfg_; }

 private:
  const synthetic_instance& find(const std::string& id) const {
    auto it = instances_.find(id);
    if (it == instances_.end())
      throw parameter_domain_error("unknown instance id: " + id);
    return it->second;
  }

  synthetic_config cfg_;
  std::map<std::string, synthetic_instance> instances_;
  std::map<std::string, long long> cursors_;
};

}  // namespace camd
