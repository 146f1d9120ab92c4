#pragma once

#include <stdexcept>
#include <string>

namespace camd {

/// Distribution or prior parameters outside their admissible domain.
struct parameter_domain_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Operation asked of a distribution family that does not support it.
struct unsupported_family_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A risk target that no sampling budget can reach (epsilon <= irreducible risk).
struct infeasible_target_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct empty_input_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Mismatched vector dimensions or sequence lengths.
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A zero-norm vector where a direction is required.
struct degenerate_vector_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// A distribution that was required to sum to 1 and does not.
struct normalization_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Requested vector separation cannot be realized in the given dimension.
struct dimensionality_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Sampling budget exhausted; carries the best answer available at that point.
struct budget_error : std::runtime_error {
  explicit budget_error(const std::string& what, std::string best_effort = {})
      : std::runtime_error(what), best_effort_answer(std::move(best_effort)) {}
  std::string best_effort_answer;
};

/// Campaign configuration problem; message carries file:line context.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct wire_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct unsupported_mode_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace camd
