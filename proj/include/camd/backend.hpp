#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "camd/candidate.hpp"

namespace camd {

struct cost_ledger {
  long long calls = 0;
  long long candidates = 0;
};

/// Candidate source the controller samples from. Implementations must be
/// deterministic under a fixed seed and must only return candidates that
/// pass validate_candidate. Correctness labels never travel through this
/// interface.
class candidate_backend {
 public:
  virtual ~candidate_backend() = default;

  virtual std::vector<candidate> generate(const std::string& instance_id,
                                          long long batch,
                                          std::uint64_t seed) = 0;

  virtual evidence_context context(const std::string& instance_id) = 0;

  const cost_ledger& costs() const noexcept { return ledger_; }

 protected:
  void charge(long long n_candidates) noexcept {
    ledger_.calls += 1;
    ledger_.candidates += n_candidates;
  }

 private:
  cost_ledger ledger_;
};

}  // namespace camd
