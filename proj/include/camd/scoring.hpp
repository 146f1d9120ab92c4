#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "camd/candidate.hpp"
#include "camd/errors.hpp"

namespace camd {

struct evidence_score {
  double s_gen = 0.0;
  double s_align = 0.0;
  double s_coh = 0.0;
  double combined = 0.0;
  double normalized_weight = 0.0;
};

struct scoring_options {
  double lambda_g = 1.0;
  double lambda_c = 0.3;
  // Min-max rescale each component to [0,1] across the candidate set before
  // combining; bridges the scale gap between the unbounded mean logprob and
  // the bounded cosine scores.
  bool normalize_components = true;
};

/// Mean token logprob; always <= 0.
inline double score_generation(const candidate& c) {
  if (c.token_logprobs.empty())
    throw empty_input_error("score_generation: candidate has no tokens");
  double sum = 0.0;
  for (double lp : c.token_logprobs) sum += lp;
  return sum / static_cast<double>(c.token_logprobs.size());
}

/// Mean over tokens of 0.5*(mean_j cos(v_j, e_t) + mean_r max_j cos(t_r, v_j)).
/// The text-to-visual term does not depend on the token, so it is computed
/// once and shared.
inline double score_alignment(const candidate& c, const evidence_context& ctx) {
  if (c.token_embeddings.empty())
    throw empty_input_error("score_alignment: candidate has no tokens");
  validate_context(ctx);

  const double nv = static_cast<double>(ctx.visual_features.size());
  double text_term = 0.0;
  for (const auto& t : ctx.text_features) {
    double best = -1.0;
    for (const auto& v : ctx.visual_features)
      best = std::max(best, detail::cosine(t, v));
    text_term += best;
  }
  text_term /= static_cast<double>(ctx.text_features.size());

  double total = 0.0;
  for (const auto& e : c.token_embeddings) {
    double vis = 0.0;
    for (const auto& v : ctx.visual_features) vis += detail::cosine(v, e);
    total += 0.5 * (vis / nv + text_term);
  }
  return total / static_cast<double>(c.token_embeddings.size());
}

/// Mean cosine between consecutive hidden states; token embeddings stand in
/// when hidden states are absent. Single-token candidates score 1.
inline double score_coherence(const candidate& c) {
  const auto& seq =
      c.hidden_states.empty() ? c.token_embeddings : c.hidden_states;
  if (seq.empty())
    throw empty_input_error("score_coherence: candidate has no tokens");
  if (seq.size() == 1) return 1.0;
  double sum = 0.0;
  for (std::size_t t = 0; t + 1 < seq.size(); ++t)
    sum += detail::cosine(seq[t], seq[t + 1]);
  return sum / static_cast<double>(seq.size() - 1);
}

inline double combine_scores(double s_gen, double s_align, double s_coh,
                             double lambda_g = 1.0, double lambda_c = 0.3) {
  if (lambda_g < 0.0 || lambda_c < 0.0)
    throw parameter_domain_error("combine_scores: weights must be >= 0");
  return s_gen + lambda_g * s_align + lambda_c * s_coh;
}

/// Max-subtraction softmax; sums to 1, argmax preserved.
inline std::vector<double> normalize_weights(const std::vector<double>& scores) {
  if (scores.empty())
    throw empty_input_error("normalize_weights: no scores");
  const double m = *std::max_element(scores.begin(), scores.end());
  std::vector<double> w(scores.size());
  double z = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    w[i] = std::exp(scores[i] - m);
    z += w[i];
  }
  for (double& x : w) x /= z;
  return w;
}

namespace detail {

// Min-max to [0,1]; a flat component maps to a common 0.5 so it carries no
// ranking signal either way.
inline void min_max_rescale(std::vector<double>& xs) {
  const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi - lo < 1e-15) {
    std::fill(xs.begin(), xs.end(), 0.5);
    return;
  }
  for (double& x : xs) x = (x - lo) / (hi - lo);
}

}  // namespace detail

/// Full per-set pipeline: components, optional min-max normalization,
/// combination, softmax weights. Context may be null (alignment scores 0).
inline std::vector<evidence_score> score_candidates(
    const std::vector<candidate>& cands, const evidence_context* ctx,
    const scoring_options& opt = {}) {
  if (cands.empty()) throw empty_input_error("score_candidates: no candidates");
  if (opt.lambda_g < 0.0 || opt.lambda_c < 0.0)
    throw parameter_domain_error("score_candidates: weights must be >= 0");

  const std::size_t n = cands.size();
  std::vector<double> gen(n), align(n), coh(n);
  for (std::size_t i = 0; i < n; ++i) {
    validate_candidate(cands[i]);
    gen[i] = score_generation(cands[i]);
    align[i] = ctx ? score_alignment(cands[i], *ctx) : 0.0;
    coh[i] = score_coherence(cands[i]);
  }

  std::vector<evidence_score> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].s_gen = gen[i];
    out[i].s_align = align[i];
    out[i].s_coh = coh[i];
  }

  if (opt.normalize_components) {
    detail::min_max_rescale(gen);
    detail::min_max_rescale(align);
    detail::min_max_rescale(coh);
  }
  std::vector<double> combined(n);
  for (std::size_t i = 0; i < n; ++i) {
    combined[i] =
        combine_scores(gen[i], align[i], coh[i], opt.lambda_g, opt.lambda_c);
    out[i].combined = combined[i];
  }
  const std::vector<double> w = normalize_weights(combined);
  for (std::size_t i = 0; i < n; ++i) out[i].normalized_weight = w[i];
  return out;
}

}  // namespace camd
