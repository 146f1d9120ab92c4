#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "camd/config.hpp"
#include "camd/coverage.hpp"
#include "camd/experiment.hpp"
#include "camd/synthetic.hpp"
#include "camd/wire.hpp"

namespace {

struct common_flags {
  std::string config_path;
  std::string out_dir = ".";
  std::string profile = "full";
  std::uint64_t seed = 0;
  bool seed_set = false;
};

void add_common(CLI::App* cmd, common_flags& fl, bool needs_config) {
  auto* cfg = cmd->add_option("--config", fl.config_path,
                              "campaign config file (INI)");
  if (needs_config) cfg->required();
  cmd->add_option("--out", fl.out_dir, "output directory");
  cmd->add_option("--profile", fl.profile, "ci or full")
      ->check(CLI::IsMember({"ci", "full"}));
  cmd->add_option("--seed", fl.seed, "override the campaign seed")
      ->each([&fl](const std::string&) { fl.seed_set = true; });
}

camd::campaign_config load_with_overrides(const common_flags& fl) {
  auto cfg = camd::load_campaign_file(fl.config_path);
  if (fl.seed_set) cfg.seed = fl.seed;
  return cfg;
}

std::string out_file(const common_flags& fl, const std::string& name) {
  std::filesystem::create_directories(fl.out_dir);
  return (std::filesystem::path(fl.out_dir) / name).string();
}

int run_theory(const common_flags& fl) {
  const auto cfg = load_with_overrides(fl);
  const auto report =
      camd::run_theory_suite(cfg, camd::parse_profile(fl.profile));
  const auto path = out_file(fl, "theory.csv");
  camd::write_text_file(path, camd::theory_to_csv(report));
  std::cout << camd::theory_fits_markdown(report);
  std::cout << "wrote " << path << "\n";
  return 0;
}

int run_compare(const common_flags& fl) {
  const auto cfg = load_with_overrides(fl);
  try {
    const auto report =
        camd::run_policy_comparison(cfg, camd::parse_profile(fl.profile));
    camd::emit_report(report, "csv", out_file(fl, "records.csv"));
    std::cout << "wrote " << out_file(fl, "records.csv") << "\n";
    return 0;
  } catch (const camd::campaign_abort& e) {
    if (!e.partial.empty()) {
      const auto path = out_file(fl, "records_partial.csv");
      camd::write_text_file(path, camd::records_to_csv(e.partial));
      std::cerr << "flushed " << e.partial.size() << " finished rows to "
                << path << "\n";
    }
    std::cerr << "campaign aborted: " << e.what() << "\n";
    return 1;
  }
}

int run_ndelta(const std::vector<double>& ss, double delta) {
  for (const double s : ss)
    std::cout << camd::delta_coverage_size(s, delta) << "\n";
  return 0;
}

int run_kstar(const std::string& dist_spec, double eps, double r_irr) {
  const auto dist = camd::parse_distribution(dist_spec);
  const auto plan = camd::budget_for_risk(dist, eps, r_irr);
  std::cout << "k_star=" << plan.k << "\n"
            << "theory_estimate=" << camd::detail::fmt9(plan.theory_estimate)
            << "\n"
            << "approximate=" << (plan.estimate_is_approximate ? "true" : "false")
            << "\n";
  return 0;
}

int run_serve(const common_flags& fl, std::uint16_t port) {
  const auto cfg = load_with_overrides(fl);
  if (cfg.backend_kind != "synthetic")
    throw camd::config_error("serve-backend requires a synthetic campaign");

  camd::synthetic_backend backend(cfg.synthetic);
  for (long long i = 0; i < cfg.num_instances; ++i)
    backend.register_instance(
        camd::detail::instance_label(i),
        camd::make_instance(cfg.distribution, cfg.embedding_dim,
                            cfg.archetypes, camd::derive_seed(cfg.seed, i),
                            cfg.synthetic));

  camd::wire_server server(backend);
  server.bind_listen(port);
  std::cout << "serving " << cfg.num_instances << " instances on 127.0.0.1:"
            << server.port() << std::endl;
  server.run();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coverage-adaptive sampling experiments"};
  app.require_subcommand(1);

  common_flags theory_fl, compare_fl, serve_fl;
  std::vector<double> ndelta_s;
  double ndelta_delta = 0.05;
  std::string kstar_dist;
  double kstar_eps = 0.1;
  double kstar_rirr = 0.0;
  std::uint16_t serve_port = 0;

  auto* theory = app.add_subcommand(
      "theory", "estimate residual-decay curves and fit tail exponents");
  add_common(theory, theory_fl, true);

  auto* compare = app.add_subcommand(
      "compare", "run all configured stopping policies on one instance set");
  add_common(compare, compare_fl, true);

  auto* ndelta = app.add_subcommand(
      "ndelta", "print the delta-coverage sample size for given s");
  ndelta->add_option("--s", ndelta_s, "per-trial success probability")
      ->required();
  ndelta->add_option("--delta", ndelta_delta, "residual tolerance");

  auto* kstar =
      app.add_subcommand("kstar", "plan a sampling budget for a target risk");
  kstar->add_option("--dist", kstar_dist, "distribution spec, e.g. beta:1,1")
      ->required();
  kstar->add_option("--eps", kstar_eps, "target excess risk")->required();
  kstar->add_option("--r-irr", kstar_rirr, "irreducible risk");

  auto* serve = app.add_subcommand(
      "serve-backend", "expose the synthetic backend over the line protocol");
  add_common(serve, serve_fl, true);
  serve->add_option("--port", serve_port, "listen port (0 picks one)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (theory->parsed()) return run_theory(theory_fl);
    if (compare->parsed()) return run_compare(compare_fl);
    if (ndelta->parsed()) return run_ndelta(ndelta_s, ndelta_delta);
    if (kstar->parsed()) return run_kstar(kstar_dist, kstar_eps, kstar_rirr);
    if (serve->parsed()) return run_serve(serve_fl, serve_port);
  } catch (const camd::infeasible_target_error& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return 3;
  } catch (const camd::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const camd::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const camd::unsupported_mode_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
