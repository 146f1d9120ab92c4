// Runs the adaptive controller against one synthetic instance and prints the
// per-round decision log, then replays the same instance under a fixed
// best-of-8 policy for cost contrast.

#include <cstdio>
#include <string>

#include "camd/controller.hpp"
#include "camd/synthetic.hpp"

using namespace camd;

namespace {

void run(const char* label, const stopping_policy& policy,
         const synthetic_instance& inst, const synthetic_config& syn,
         bool print_rounds) {
  synthetic_backend backend(syn);
  backend.register_instance("demo", inst);
  const auto ctx = backend.context("demo");

  controller_config cfg;
  cfg.dedup_threshold = 0.999;
  cfg.batch_size = 2;
  cfg.max_samples = 32;

  adaptive_controller ctl(policy, cfg, &ctx);
  step_decision d;
  do {
    d = ctl.step(backend.generate("demo", ctl.requested_batch(), 7));
    if (print_rounds)
      std::printf("  %s\n", ctl.round_log_entry().dump().c_str());
  } while (!d.stop);

  const bool right = backend.answer_is_correct("demo", d.final_answer);
  std::printf("%s: answer \"%s\" (%s), %lld samples, %lld tokens, %s\n",
              label, d.final_answer.c_str(), right ? "correct" : "wrong",
              ctl.state().samples_used, ctl.state().tokens_used,
              to_string(d.reason));
}

}  // namespace

int main() {
  synthetic_config syn;
  syn.separation_threshold = 0.85;

  const auto dist = difficulty_distribution::heavy_tail(0.7, 0.5);
  const auto inst = make_instance(dist, 16, 16, 20240602, syn);
  std::printf("instance difficulty s = %.3f\n\n", inst.true_s);

  run("adaptive", stopping_policy::camd(0.05), inst, syn, true);
  std::printf("\n");
  run("fixed(8)", stopping_policy::fixed_n(8), inst, syn, false);
  return 0;
}
