#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "camd/candidate.hpp"
#include "camd/errors.hpp"

namespace camd {

struct cluster {
  std::vector<std::size_t> members;  // candidate pool indices, ascending
  std::size_t representative = 0;    // member with highest combined score
  double posterior_weight = 0.0;
};

struct cluster_set {
  std::vector<cluster> clusters;  // ordered by smallest member index
  double similarity_threshold = 0.85;
  int round = 0;
  double p_star = 0.0;
  std::size_t p_star_index = 0;  // ties broken toward the lowest index
};

/// Mean-pooled token embedding, unit-normalized.
inline std::vector<double> answer_embedding(const candidate& c) {
  if (c.token_embeddings.empty())
    throw empty_input_error("answer_embedding: candidate has no tokens");
  const std::size_t d = c.token_embeddings.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& e : c.token_embeddings) {
    if (e.size() != d)
      throw shape_error("answer_embedding: ragged token embeddings");
    for (std::size_t i = 0; i < d; ++i) mean[i] += e[i];
  }
  double norm2 = 0.0;
  for (double& x : mean) {
    x /= static_cast<double>(c.token_embeddings.size());
    norm2 += x * x;
  }
  if (norm2 == 0.0)
    throw degenerate_vector_error("answer_embedding: zero mean embedding");
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : mean) x *= inv;
  return mean;
}

inline double pairwise_similarity(const candidate& a, const candidate& b) {
  return detail::dot(answer_embedding(a), answer_embedding(b));
}

namespace detail {

inline void check_similarity_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0))
    throw parameter_domain_error("similarity threshold must lie in (0,1)");
}

inline std::vector<std::vector<double>> pooled_embeddings(
    const std::vector<candidate>& pool, const std::vector<std::size_t>& idx) {
  std::vector<std::vector<double>> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(answer_embedding(pool[i]));
  return out;
}

}  // namespace detail

/// Greedy arrival-order dedup: drop a candidate iff its similarity to an
/// already-retained one exceeds the threshold. Returns retained pool indices.
inline std::vector<std::size_t> deduplicate(const std::vector<candidate>& pool,
                                            double threshold = 0.9) {
  detail::check_similarity_threshold(threshold);
  std::vector<std::size_t> retained;
  std::vector<std::vector<double>> kept_embeddings;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const auto emb = answer_embedding(pool[i]);
    bool duplicate = false;
    for (const auto& k : kept_embeddings) {
      if (detail::dot(emb, k) > threshold) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) {
      retained.push_back(i);
      kept_embeddings.push_back(emb);
    }
  }
  return retained;
}

/// Single-linkage clustering over the active candidates: connect i,j when
/// cosine similarity exceeds the threshold; clusters are the connected
/// components. Representative is the member with the highest combined score
/// (lowest index on ties). `combined_scores` is indexed by pool position.
inline cluster_set cluster_candidates(
    const std::vector<candidate>& pool, const std::vector<std::size_t>& active,
    const std::vector<double>& combined_scores, double threshold = 0.85,
    int round = 0) {
  detail::check_similarity_threshold(threshold);
  if (active.empty())
    throw empty_input_error("cluster_candidates: no active candidates");
  if (combined_scores.size() != pool.size())
    throw shape_error("cluster_candidates: one score per pool candidate");
  for (std::size_t i : active)
    if (i >= pool.size())
      throw shape_error("cluster_candidates: active index out of range");

  const std::size_t n = active.size();
  const auto embeddings = detail::pooled_embeddings(pool, active);

  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (detail::dot(embeddings[i], embeddings[j]) > threshold) {
        const auto ri = find(i), rj = find(j);
        if (ri != rj) parent[std::max(ri, rj)] = std::min(ri, rj);
      }

  cluster_set cs;
  cs.similarity_threshold = threshold;
  cs.round = round;
  std::vector<long long> root_to_cluster(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto root = find(i);
    if (root_to_cluster[root] < 0) {
      root_to_cluster[root] = static_cast<long long>(cs.clusters.size());
      cs.clusters.emplace_back();
    }
    cs.clusters[static_cast<std::size_t>(root_to_cluster[root])]
        .members.push_back(active[i]);
  }
  for (auto& c : cs.clusters) {
    c.representative = c.members.front();
    for (std::size_t m : c.members)
      if (combined_scores[m] > combined_scores[c.representative])
        c.representative = m;
  }
  return cs;
}

/// Fill p_k = sum_{i in C_k} exp(S_i) / sum_all exp(S_j) with max-subtraction
/// stabilization, and the stop statistic p* = max_k p_k.
inline cluster_set posterior_weights(cluster_set cs,
                                     const std::vector<double>& combined_scores) {
  if (cs.clusters.empty())
    throw empty_input_error("posterior_weights: empty cluster set");
  double m = -std::numeric_limits<double>::infinity();
  for (const auto& c : cs.clusters)
    for (std::size_t i : c.members) {
      if (i >= combined_scores.size())
        throw shape_error("posterior_weights: score index out of range");
      m = std::max(m, combined_scores[i]);
    }
  double z = 0.0;
  for (auto& c : cs.clusters) {
    double num = 0.0;
    for (std::size_t i : c.members) num += std::exp(combined_scores[i] - m);
    c.posterior_weight = num;
    z += num;
  }
  cs.p_star = 0.0;
  cs.p_star_index = 0;
  for (std::size_t k = 0; k < cs.clusters.size(); ++k) {
    cs.clusters[k].posterior_weight /= z;
    if (cs.clusters[k].posterior_weight > cs.p_star) {
      cs.p_star = cs.clusters[k].posterior_weight;
      cs.p_star_index = k;
    }
  }
  return cs;
}

/// Coverage stop rule: the pool is believed covered once p* >= 1 - delta.
inline bool should_stop(double p_star, double delta) {
  if (!(delta > 0.0 && delta < 1.0))
    throw parameter_domain_error("delta must lie in (0,1)");
  if (!(p_star > 0.0 && p_star <= 1.0))
    throw parameter_domain_error("p_star must lie in (0,1]");
  return p_star >= 1.0 - delta;
}

inline nlohmann::json cluster_set_to_json(const cluster_set& cs) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : cs.clusters)
    clusters.push_back({{"members", c.members},
                        {"representative", c.representative},
                        {"weight", c.posterior_weight}});
  return nlohmann::json{{"round", cs.round},
                        {"similarity_threshold", cs.similarity_threshold},
                        {"p_star", cs.p_star},
                        {"p_star_index", cs.p_star_index},
                        {"clusters", clusters}};
}

}  // namespace camd
