#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "camd/clustering.hpp"
#include "camd/rng.hpp"

namespace {

using camd::candidate;

// Single-token candidate whose answer embedding is exactly the given vector.
candidate at_direction(std::vector<double> v, double logprob = -1.0) {
  candidate c;
  c.answer_text = "x";
  c.token_logprobs = {logprob};
  c.token_embeddings = {std::move(v)};
  return c;
}

candidate at_angle(double radians) {
  return at_direction({std::cos(radians), std::sin(radians)});
}

std::vector<double> flat_scores(std::size_t n, double v = 0.0) {
  return std::vector<double>(n, v);
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  return idx;
}

}  // namespace

TEST_CASE("pairwise similarity is the cosine of mean-pooled embeddings",
          "[clustering]") {
  candidate a = at_direction({1.0, 0.0});
  candidate b = at_direction({1.0, 0.0});
  REQUIRE_THAT(camd::pairwise_similarity(a, b),
               Catch::Matchers::WithinAbs(1.0, 1e-12));

  candidate c = at_direction({0.0, 1.0});
  REQUIRE_THAT(camd::pairwise_similarity(a, c),
               Catch::Matchers::WithinAbs(0.0, 1e-12));

  const double r = 1.0 / std::sqrt(2.0);
  candidate d = at_direction({r, r});
  REQUIRE_THAT(camd::pairwise_similarity(a, d),
               Catch::Matchers::WithinAbs(0.70710678118, 1e-9));
  REQUIRE(camd::pairwise_similarity(a, d) == camd::pairwise_similarity(d, a));

  // Mean pooling happens before normalization.
  candidate two_tok;
  two_tok.answer_text = "x";
  two_tok.token_logprobs = {-1.0, -1.0};
  two_tok.token_embeddings = {{2.0, 0.0}, {0.0, 2.0}};
  REQUIRE_THAT(camd::pairwise_similarity(two_tok, d),
               Catch::Matchers::WithinAbs(1.0, 1e-12));

  candidate degen;
  degen.answer_text = "x";
  degen.token_logprobs = {-1.0, -1.0};
  degen.token_embeddings = {{1.0, 0.0}, {-1.0, 0.0}};
  REQUIRE_THROWS_AS(camd::pairwise_similarity(degen, a),
                    camd::degenerate_vector_error);
}

TEST_CASE("dedup keeps the first of each near-duplicate group", "[clustering]") {
  std::vector<candidate> twins = {at_direction({1.0, 0.0}),
                                  at_direction({2.0, 0.0})};
  REQUIRE(camd::deduplicate(twins, 0.9) == std::vector<std::size_t>{0});

  std::vector<candidate> spread = {at_angle(0.0), at_angle(1.0), at_angle(2.0)};
  REQUIRE(camd::deduplicate(spread, 0.9) ==
          std::vector<std::size_t>({0, 1, 2}));

  // B duplicates A and is dropped; C is near the dropped B but only
  // moderately similar to retained A, so C survives.
  const double ang_b = std::acos(0.95);
  const double ang_c = std::acos(0.85);
  std::vector<candidate> chain = {at_angle(0.0), at_angle(ang_b),
                                  at_angle(ang_c)};
  REQUIRE(camd::pairwise_similarity(chain[1], chain[2]) > 0.9);
  REQUIRE(camd::deduplicate(chain, 0.9) == std::vector<std::size_t>({0, 2}));

  REQUIRE_THROWS_AS(camd::deduplicate(twins, 1.0),
                    camd::parameter_domain_error);
}

TEST_CASE("single linkage merges through chains", "[clustering]") {
  // Sim(0,1) high, the rest low: two clusters.
  std::vector<candidate> pool = {at_angle(0.0), at_angle(0.1),
                                 at_angle(1.4)};
  auto cs = camd::cluster_candidates(pool, all_indices(3),
                                     flat_scores(3), 0.85, 7);
  REQUIRE(cs.clusters.size() == 2);
  REQUIRE(cs.clusters[0].members == std::vector<std::size_t>({0, 1}));
  REQUIRE(cs.clusters[1].members == std::vector<std::size_t>({2}));
  REQUIRE(cs.round == 7);

  // All mutually similar: one cluster.
  std::vector<candidate> same = {at_direction({1.0, 0.0}),
                                 at_direction({3.0, 0.0}),
                                 at_direction({0.5, 0.0})};
  auto one = camd::cluster_candidates(same, all_indices(3), flat_scores(3));
  REQUIRE(one.clusters.size() == 1);
  REQUIRE(one.clusters[0].members == std::vector<std::size_t>({0, 1, 2}));

  // 0-1 and 1-2 connected, 0-2 not: transitive single cluster.
  const double theta = std::acos(0.9);
  std::vector<candidate> bridge = {at_angle(0.0), at_angle(theta),
                                   at_angle(2.0 * theta)};
  REQUIRE(camd::pairwise_similarity(bridge[0], bridge[2]) < 0.85);
  auto merged =
      camd::cluster_candidates(bridge, all_indices(3), flat_scores(3), 0.85);
  REQUIRE(merged.clusters.size() == 1);

  REQUIRE_THROWS_AS(
      camd::cluster_candidates(pool, {}, flat_scores(3), 0.85),
      camd::empty_input_error);
}

TEST_CASE("representative is the best-scoring member", "[clustering]") {
  std::vector<candidate> pool = {at_angle(0.0), at_angle(0.05),
                                 at_angle(0.1)};
  auto cs = camd::cluster_candidates(pool, all_indices(3),
                                     {0.1, 0.9, 0.4}, 0.85);
  REQUIRE(cs.clusters.size() == 1);
  REQUIRE(cs.clusters[0].representative == 1);

  // Tie goes to the lowest index.
  auto tie = camd::cluster_candidates(pool, all_indices(3),
                                      {0.4, 0.4, 0.1}, 0.85);
  REQUIRE(tie.clusters[0].representative == 0);

  // Active subset: members keep pool indices.
  auto subset = camd::cluster_candidates(pool, {1, 2}, {0.1, 0.9, 0.4}, 0.85);
  REQUIRE(subset.clusters.size() == 1);
  REQUIRE(subset.clusters[0].members == std::vector<std::size_t>({1, 2}));
  REQUIRE(subset.clusters[0].representative == 1);
}

TEST_CASE("posterior weights are the score-mass shares", "[clustering]") {
  // Clusters {0,1} scoring 1,1 and {2} scoring 0.
  std::vector<candidate> pool = {at_angle(0.0), at_angle(0.05),
                                 at_angle(1.4)};
  const std::vector<double> scores = {1.0, 1.0, 0.0};
  auto cs = camd::posterior_weights(
      camd::cluster_candidates(pool, all_indices(3), scores, 0.85), scores);
  const double e = std::exp(1.0);
  REQUIRE_THAT(cs.clusters[0].posterior_weight,
               Catch::Matchers::WithinAbs(2.0 * e / (2.0 * e + 1.0), 1e-9));
  REQUIRE_THAT(cs.clusters[1].posterior_weight,
               Catch::Matchers::WithinAbs(1.0 / (2.0 * e + 1.0), 1e-9));
  REQUIRE_THAT(cs.p_star,
               Catch::Matchers::WithinAbs(2.0 * e / (2.0 * e + 1.0), 1e-9));
  REQUIRE(cs.p_star_index == 0);

  // Equal scores: weights proportional to cluster sizes (3,1).
  std::vector<candidate> four = {at_angle(0.0), at_angle(0.04),
                                 at_angle(0.08), at_angle(1.4)};
  auto sized = camd::posterior_weights(
      camd::cluster_candidates(four, all_indices(4), flat_scores(4), 0.85),
      flat_scores(4));
  REQUIRE_THAT(sized.clusters[0].posterior_weight,
               Catch::Matchers::WithinAbs(0.75, 1e-9));
  REQUIRE_THAT(sized.clusters[1].posterior_weight,
               Catch::Matchers::WithinAbs(0.25, 1e-9));

  // Single cluster: p* = 1.
  std::vector<candidate> solo = {at_angle(0.0)};
  auto lone = camd::posterior_weights(
      camd::cluster_candidates(solo, {0}, flat_scores(1), 0.85),
      flat_scores(1));
  REQUIRE_THAT(lone.p_star, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("posterior weights shift-invariant and additive under merges",
          "[clustering]") {
  auto rng = camd::make_engine(83);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 3 + trial % 6;
    std::vector<candidate> pool;
    std::vector<double> scores;
    for (std::size_t i = 0; i < n; ++i) {
      pool.push_back(
          at_angle(2.0 * 3.14159265 * camd::uniform_unit(rng)));
      scores.push_back(4.0 * camd::uniform_unit(rng) - 2.0);
    }
    auto base = camd::cluster_candidates(pool, all_indices(n), scores, 0.85);
    auto weighted = camd::posterior_weights(base, scores);

    std::vector<double> shifted = scores;
    for (double& s : shifted) s += 123.456;
    auto shifted_cs = camd::posterior_weights(base, shifted);
    for (std::size_t k = 0; k < weighted.clusters.size(); ++k)
      REQUIRE_THAT(shifted_cs.clusters[k].posterior_weight,
                   Catch::Matchers::WithinAbs(
                       weighted.clusters[k].posterior_weight, 1e-9));

    if (weighted.clusters.size() >= 2) {
      camd::cluster_set merged = weighted;
      auto& dst = merged.clusters[0];
      auto& src = merged.clusters[1];
      const double expect =
          dst.posterior_weight + src.posterior_weight;
      dst.members.insert(dst.members.end(), src.members.begin(),
                         src.members.end());
      std::sort(dst.members.begin(), dst.members.end());
      merged.clusters.erase(merged.clusters.begin() + 1);
      auto re = camd::posterior_weights(merged, scores);
      REQUIRE_THAT(re.clusters[0].posterior_weight,
                   Catch::Matchers::WithinAbs(expect, 1e-12));
    }
  }
}

TEST_CASE("clusters partition the active set on random pools", "[clustering]") {
  auto rng = camd::make_engine(97);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(
                                  11.0 * camd::uniform_unit(rng));
    std::vector<candidate> pool;
    std::vector<double> scores;
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> v(6);
      double norm2 = 0.0;
      do {
        norm2 = 0.0;
        for (auto& x : v) {
          x = g(rng);
          norm2 += x * x;
        }
      } while (norm2 == 0.0);
      pool.push_back(at_direction(v));
      scores.push_back(g(rng));
    }
    const double threshold = 0.05 + 0.9 * camd::uniform_unit(rng);
    auto cs = camd::posterior_weights(
        camd::cluster_candidates(pool, all_indices(n), scores, threshold),
        scores);

    std::set<std::size_t> seen;
    double wsum = 0.0;
    for (const auto& c : cs.clusters) {
      REQUIRE(!c.members.empty());
      bool rep_found = false;
      for (std::size_t m : c.members) {
        REQUIRE(seen.insert(m).second);
        rep_found |= (m == c.representative);
      }
      REQUIRE(rep_found);
      wsum += c.posterior_weight;
    }
    REQUIRE(seen.size() == n);
    REQUIRE_THAT(wsum, Catch::Matchers::WithinAbs(1.0, 1e-9));

    // Determinism across repeated runs on identical inputs.
    auto again = camd::posterior_weights(
        camd::cluster_candidates(pool, all_indices(n), scores, threshold),
        scores);
    REQUIRE(again.clusters.size() == cs.clusters.size());
    for (std::size_t k = 0; k < cs.clusters.size(); ++k) {
      REQUIRE(again.clusters[k].members == cs.clusters[k].members);
      REQUIRE(again.clusters[k].representative ==
              cs.clusters[k].representative);
      REQUIRE(again.clusters[k].posterior_weight ==
              cs.clusters[k].posterior_weight);
    }
  }
}

TEST_CASE("stop rule fires at the coverage boundary", "[clustering]") {
  REQUIRE(camd::should_stop(0.96, 0.05));
  REQUIRE_FALSE(camd::should_stop(0.94, 0.05));
  REQUIRE(camd::should_stop(0.95, 0.05));
  REQUIRE_THROWS_AS(camd::should_stop(0.5, 0.0),
                    camd::parameter_domain_error);
  REQUIRE_THROWS_AS(camd::should_stop(0.0, 0.05),
                    camd::parameter_domain_error);
}

TEST_CASE("cluster sets serialize for round logs", "[clustering]") {
  std::vector<candidate> pool = {at_angle(0.0), at_angle(0.05),
                                 at_angle(1.4)};
  const std::vector<double> scores = {0.2, 0.8, 0.5};
  auto cs = camd::posterior_weights(
      camd::cluster_candidates(pool, all_indices(3), scores, 0.85, 3), scores);
  const auto j = camd::cluster_set_to_json(cs);
  REQUIRE(j.at("round").get<int>() == 3);
  REQUIRE(j.at("clusters").size() == 2);
  REQUIRE(j.at("clusters")[0].at("representative").get<std::size_t>() == 1);
  REQUIRE_THAT(j.at("p_star").get<double>(),
               Catch::Matchers::WithinAbs(cs.p_star, 0.0));
  REQUIRE(j.at("similarity_threshold").get<double>() == 0.85);
}
