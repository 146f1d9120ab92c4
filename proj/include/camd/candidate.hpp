#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <json.hpp>

#include "camd/errors.hpp"

namespace camd {

struct candidate {
  std::string answer_text;
  std::vector<double> token_logprobs;
  std::vector<std::vector<double>> token_embeddings;
  // Empty means absent; coherence then falls back to token_embeddings.
  std::vector<std::vector<double>> hidden_states;

  std::size_t token_count() const { return token_logprobs.size(); }
};

struct evidence_context {
  std::vector<std::vector<double>> visual_features;
  std::vector<std::vector<double>> text_features;
};

namespace detail {

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw shape_error("vector dimensions differ: " + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const std::vector<double>& a) {
  double s = 0.0;
  for (double v : a) s += v * v;
  return std::sqrt(s);
}

inline double cosine(const std::vector<double>& a,
                     const std::vector<double>& b) {
  const double na = norm(a), nb = norm(b);
  if (na == 0.0 || nb == 0.0)
    throw degenerate_vector_error("cosine of a zero-norm vector");
  return dot(a, b) / (na * nb);
}

}  // namespace detail

inline void validate_candidate(const candidate& c) {
  const std::size_t L = c.token_logprobs.size();
  if (L == 0) throw empty_input_error("candidate has no tokens");
  if (c.token_embeddings.size() != L)
    throw shape_error("token_embeddings length " +
                      std::to_string(c.token_embeddings.size()) +
                      " != token count " + std::to_string(L));
  if (!c.hidden_states.empty() && c.hidden_states.size() != L)
    throw shape_error("hidden_states length " +
                      std::to_string(c.hidden_states.size()) +
                      " != token count " + std::to_string(L));
  for (double lp : c.token_logprobs)
    if (lp > 0.0)
      throw parameter_domain_error("token logprob above 0: " +
                                   std::to_string(lp));
  for (const auto& e : c.token_embeddings)
    if (detail::norm(e) == 0.0)
      throw degenerate_vector_error("zero-norm token embedding");
}

inline void validate_context(const evidence_context& ctx) {
  if (ctx.visual_features.empty())
    throw empty_input_error("context has no visual features");
  if (ctx.text_features.empty())
    throw empty_input_error("context has no text features");
  for (const auto& v : ctx.visual_features)
    if (detail::norm(v) == 0.0)
      throw degenerate_vector_error("zero-norm visual feature");
  for (const auto& t : ctx.text_features)
    if (detail::norm(t) == 0.0)
      throw degenerate_vector_error("zero-norm text feature");
}

inline nlohmann::json candidate_to_json(const candidate& c) {
  nlohmann::json j{{"answer_text", c.answer_text},
                   {"token_logprobs", c.token_logprobs},
                   {"token_embeddings", c.token_embeddings}};
  if (!c.hidden_states.empty()) j["hidden_states"] = c.hidden_states;
  return j;
}

inline candidate candidate_from_json(const nlohmann::json& j) {
  try {
    candidate c;
    c.answer_text = j.at("answer_text").get<std::string>();
    c.token_logprobs = j.at("token_logprobs").get<std::vector<double>>();
    c.token_embeddings =
        j.at("token_embeddings").get<std::vector<std::vector<double>>>();
    if (j.contains("hidden_states"))
      c.hidden_states =
          j.at("hidden_states").get<std::vector<std::vector<double>>>();
    validate_candidate(c);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw shape_error(std::string("candidate json: ") + e.what());
  }
}

inline nlohmann::json context_to_json(const evidence_context& ctx) {
  return nlohmann::json{{"visual_features", ctx.visual_features},
                        {"text_features", ctx.text_features}};
}

inline evidence_context context_from_json(const nlohmann::json& j) {
  try {
    evidence_context ctx;
    ctx.visual_features =
        j.at("visual_features").get<std::vector<std::vector<double>>>();
    ctx.text_features =
        j.at("text_features").get<std::vector<std::vector<double>>>();
    validate_context(ctx);
    return ctx;
  } catch (const nlohmann::json::exception& e) {
    throw shape_error(std::string("context json: ") + e.what());
  }
}

}  // namespace camd
