#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "camd/controller.hpp"
#include "camd/difficulty.hpp"
#include "camd/errors.hpp"
#include "camd/scoring.hpp"
#include "camd/synthetic.hpp"

namespace camd {

/// One parsed key=value entry with its source line for error messages.
struct ini_entry {
  std::string value;
  int line = 0;
};

using ini_document = std::map<std::string, std::map<std::string, ini_entry>>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == sep) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace detail

/// Sections of key = value pairs; '#' and ';' start comments. Unknown
/// structure fails loudly with the offending line number.
inline ini_document parse_ini(const std::string& text) {
  ini_document doc;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find_first_of("#;");
    std::string line = detail::trim(
        hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw config_error("line " + std::to_string(lineno) +
                           ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw config_error("line " + std::to_string(lineno) +
                           ": empty section name");
      doc[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw config_error("line " + std::to_string(lineno) +
                         ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (key.empty())
      throw config_error("line " + std::to_string(lineno) + ": empty key");
    if (section.empty())
      throw config_error("line " + std::to_string(lineno) +
                         ": key outside any [section]");
    doc[section][key] = ini_entry{detail::trim(line.substr(eq + 1)), lineno};
  }
  return doc;
}

namespace detail {

inline double entry_double(const ini_entry& e, const std::string& name) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw config_error("line " + std::to_string(e.line) + ": " + name +
                       " expects a number, got '" + e.value + "'");
  }
}

inline long long entry_int(const ini_entry& e, const std::string& name) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(e.value, &pos);
    if (pos != e.value.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw config_error("line " + std::to_string(e.line) + ": " + name +
                       " expects an integer, got '" + e.value + "'");
  }
}

inline bool entry_bool(const ini_entry& e, const std::string& name) {
  if (e.value == "true" || e.value == "1" || e.value == "yes") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no") return false;
  throw config_error("line " + std::to_string(e.line) + ": " + name +
                     " expects true/false, got '" + e.value + "'");
}

inline std::vector<double> parse_args(const std::string& spec,
                                      const std::string& what) {
  std::vector<double> out;
  if (spec.empty()) return out;
  for (const auto& piece : split(spec, ',')) {
    try {
      std::size_t pos = 0;
      out.push_back(std::stod(piece, &pos));
      if (pos != piece.size()) throw std::invalid_argument("trailing junk");
    } catch (const std::exception&) {
      throw config_error(what + ": bad numeric argument '" + piece + "'");
    }
  }
  return out;
}

}  // namespace detail

/// Distribution shorthand: family:arg,arg. A light_truncated base rides
/// after a semicolon, e.g. "light_truncated:0.2;beta:2,2" (default base is
/// uniform).
inline difficulty_distribution parse_distribution(const std::string& spec) {
  const std::string s = detail::trim(spec);
  const auto colon = s.find(':');
  const std::string family = detail::trim(s.substr(0, colon));
  std::string rest = colon == std::string::npos ? "" : s.substr(colon + 1);

  try {
    if (family == "light_truncated") {
      const auto semi = rest.find(';');
      const std::string base =
          semi == std::string::npos ? "" : detail::trim(rest.substr(semi + 1));
      const auto args = detail::parse_args(
          detail::trim(semi == std::string::npos ? rest
                                                 : rest.substr(0, semi)),
          spec);
      if (args.size() != 1)
        throw config_error("light_truncated expects s_min, got '" + spec +
                           "'");
      if (base.empty()) return difficulty_distribution::light_truncated(args[0]);
      return difficulty_distribution::light_truncated(
          args[0], parse_distribution(base));
    }
    const auto args = detail::parse_args(detail::trim(rest), spec);
    if (family == "point_mass") {
      if (args.size() != 1)
        throw config_error("point_mass expects s, got '" + spec + "'");
      return difficulty_distribution::point_mass(args[0]);
    }
    if (family == "beta") {
      if (args.size() != 2)
        throw config_error("beta expects a,b, got '" + spec + "'");
      return difficulty_distribution::beta(args[0], args[1]);
    }
    if (family == "heavy_tail") {
      if (args.size() == 2)
        return difficulty_distribution::heavy_tail(args[0], args[1]);
      if (args.size() == 3)
        return difficulty_distribution::heavy_tail(args[0], args[1], args[2]);
      throw config_error("heavy_tail expects alpha,kappa[,s_max], got '" +
                         spec + "'");
    }
    if (family == "stretched_exp") {
      if (args.size() != 2)
        throw config_error("stretched_exp expects theta,c, got '" + spec +
                           "'");
      return difficulty_distribution::stretched_exp(args[0], args[1]);
    }
  } catch (const parameter_domain_error& e) {
    throw config_error(std::string("distribution '") + spec +
                       "': " + e.what());
  }
  throw config_error("unknown distribution family '" + family + "'");
}

/// Policy shorthand: camd:delta | fixed:n | threshold:target[,patience] |
/// beta_bernoulli:a0,b0,gain_floor | ei:cost_per_token.
inline stopping_policy parse_policy(const std::string& spec) {
  const std::string s = detail::trim(spec);
  const auto colon = s.find(':');
  const std::string name = detail::trim(s.substr(0, colon));
  const auto args = detail::parse_args(
      colon == std::string::npos ? "" : detail::trim(s.substr(colon + 1)),
      spec);

  try {
    auto finish = [](stopping_policy p) {
      p.validate();
      return p;
    };
    if (name == "camd") {
      if (args.size() != 1)
        throw config_error("camd expects delta, got '" + spec + "'");
      return finish(stopping_policy::camd(args[0]));
    }
    if (name == "fixed") {
      if (args.size() != 1 ||
          args[0] != static_cast<double>(static_cast<long long>(args[0])))
        throw config_error("fixed expects an integer n, got '" + spec + "'");
      return finish(stopping_policy::fixed_n(static_cast<long long>(args[0])));
    }
    if (name == "threshold") {
      if (args.size() == 1)
        return finish(stopping_policy::threshold(args[0], 3));
      if (args.size() == 2)
        return finish(stopping_policy::threshold(
            args[0], static_cast<int>(args[1])));
      throw config_error("threshold expects target[,patience], got '" + spec +
                         "'");
    }
    if (name == "beta_bernoulli") {
      if (args.size() != 3)
        throw config_error("beta_bernoulli expects a0,b0,gain_floor, got '" +
                           spec + "'");
      return finish(
          stopping_policy::beta_bernoulli(args[0], args[1], args[2]));
    }
    if (name == "ei") {
      if (args.size() != 1)
        throw config_error("ei expects cost_per_token, got '" + spec + "'");
      return finish(stopping_policy::expected_improvement(args[0]));
    }
  } catch (const parameter_domain_error& e) {
    throw config_error(std::string("policy '") + spec + "': " + e.what());
  }
  throw config_error("unknown policy '" + name + "'");
}

/// Stable row label for reports.
inline std::string policy_label(const stopping_policy& p) {
  std::ostringstream os;
  switch (p.rule) {
    case stopping_policy::kind::camd:
      os << "camd(" << p.delta << ")";
      break;
    case stopping_policy::kind::fixed_n:
      os << "fixed(" << p.n_fixed << ")";
      break;
    case stopping_policy::kind::threshold:
      os << "threshold(" << p.score_target << "," << p.patience << ")";
      break;
    case stopping_policy::kind::beta_bernoulli:
      os << "beta_bernoulli(" << p.a0 << "," << p.b0 << "," << p.gain_floor
         << ")";
      break;
    case stopping_policy::kind::expected_improvement:
      os << "ei(" << p.cost_per_token << ")";
      break;
  }
  return os.str();
}

struct campaign_config {
  difficulty_distribution distribution = difficulty_distribution::beta(1, 1);
  std::string backend_kind = "synthetic";
  std::string wire_host = "127.0.0.1";
  std::uint16_t wire_port = 0;

  std::vector<stopping_policy> policies;
  long long num_instances = 100;
  long long batch_size = 2;
  long long max_samples = 64;
  std::uint64_t seed = 1;
  double delta = 0.05;

  scoring_options scoring;
  double dedup_threshold = 0.999;
  double cluster_threshold = 0.85;
  double prior_concentration = 1.0;

  synthetic_config synthetic;
  long long embedding_dim = 8;
  long long archetypes = 4;
  long long threads = 1;

  std::vector<difficulty_distribution> theory_families;
  long long theory_k_min = 1;
  long long theory_k_max = 1024;
  long long theory_instances = 100000;

  void validate() const {
    if (policies.empty()) throw config_error("campaign needs >= 1 policy");
    if (num_instances < 1)
      throw config_error("num_instances must be >= 1");
    if (batch_size < 1) throw config_error("batch_size must be >= 1");
    if (max_samples < 1) throw config_error("max_samples must be >= 1");
    if (!(delta > 0.0) || !(delta < 1.0))
      throw config_error("delta must be in (0, 1)");
    if (backend_kind != "synthetic" && backend_kind != "wire")
      throw config_error("backend must be 'synthetic' or 'wire:<host>:<port>'");
    if (embedding_dim < 2) throw config_error("dim must be >= 2");
    if (archetypes < 2) throw config_error("archetypes must be >= 2");
    if (threads < 1) throw config_error("threads must be >= 1");
    if (theory_k_min < 1 || theory_k_max < theory_k_min)
      throw config_error("theory K grid must satisfy 1 <= k_min <= k_max");
    if (theory_instances < 100)
      throw config_error("theory_instances must be >= 100");
    try {
      synthetic.validate();
    } catch (const parameter_domain_error& e) {
      throw config_error(e.what());
    }
  }
};

inline campaign_config campaign_from_ini(const std::string& text) {
  const auto doc = parse_ini(text);
  campaign_config cfg;

  auto entry = [&](const std::string& sec,
                   const std::string& key) -> const ini_entry* {
    const auto s = doc.find(sec);
    if (s == doc.end()) return nullptr;
    const auto k = s->second.find(key);
    return k == s->second.end() ? nullptr : &k->second;
  };

  if (const auto* e = entry("campaign", "distribution"))
    cfg.distribution = parse_distribution(e->value);
  if (const auto* e = entry("campaign", "backend")) {
    const auto parts = detail::split(e->value, ':');
    if (parts[0] == "synthetic" && parts.size() == 1) {
      cfg.backend_kind = "synthetic";
    } else if (parts[0] == "wire" && parts.size() == 3) {
      cfg.backend_kind = "wire";
      cfg.wire_host = parts[1];
      const long long port = detail::entry_int(
          ini_entry{parts[2], e->line}, "backend port");
      if (port < 1 || port > 65535)
        throw config_error("line " + std::to_string(e->line) +
                           ": backend port out of range");
      cfg.wire_port = static_cast<std::uint16_t>(port);
    } else {
      throw config_error("line " + std::to_string(e->line) +
                         ": backend must be 'synthetic' or 'wire:<host>:<port>'");
    }
  }
  if (const auto* e = entry("campaign", "num_instances"))
    cfg.num_instances = detail::entry_int(*e, "num_instances");
  if (const auto* e = entry("campaign", "batch_size"))
    cfg.batch_size = detail::entry_int(*e, "batch_size");
  if (const auto* e = entry("campaign", "max_samples"))
    cfg.max_samples = detail::entry_int(*e, "max_samples");
  if (const auto* e = entry("campaign", "seed"))
    cfg.seed = static_cast<std::uint64_t>(detail::entry_int(*e, "seed"));
  if (const auto* e = entry("campaign", "delta"))
    cfg.delta = detail::entry_double(*e, "delta");
  if (const auto* e = entry("campaign", "threads"))
    cfg.threads = detail::entry_int(*e, "threads");

  if (const auto* e = entry("scoring", "lambda_g"))
    cfg.scoring.lambda_g = detail::entry_double(*e, "lambda_g");
  if (const auto* e = entry("scoring", "lambda_c"))
    cfg.scoring.lambda_c = detail::entry_double(*e, "lambda_c");
  if (const auto* e = entry("scoring", "normalize"))
    cfg.scoring.normalize_components = detail::entry_bool(*e, "normalize");

  if (const auto* e = entry("clustering", "dedup_threshold"))
    cfg.dedup_threshold = detail::entry_double(*e, "dedup_threshold");
  if (const auto* e = entry("clustering", "cluster_threshold"))
    cfg.cluster_threshold = detail::entry_double(*e, "cluster_threshold");
  if (const auto* e = entry("clustering", "prior_concentration"))
    cfg.prior_concentration = detail::entry_double(*e, "prior_concentration");

  if (const auto* e = entry("policies", "compare")) {
    for (const auto& piece : detail::split(e->value, '|'))
      if (!piece.empty()) cfg.policies.push_back(parse_policy(piece));
  }

  if (const auto* e = entry("synthetic", "dim"))
    cfg.embedding_dim = detail::entry_int(*e, "dim");
  if (const auto* e = entry("synthetic", "archetypes"))
    cfg.archetypes = detail::entry_int(*e, "archetypes");
  if (const auto* e = entry("synthetic", "noise_scale"))
    cfg.synthetic.noise_scale = detail::entry_double(*e, "noise_scale");
  if (const auto* e = entry("synthetic", "irr_rate"))
    cfg.synthetic.irr_rate = detail::entry_double(*e, "irr_rate");
  if (const auto* e = entry("synthetic", "tokens_per_candidate"))
    cfg.synthetic.tokens_per_candidate =
        detail::entry_int(*e, "tokens_per_candidate");
  if (const auto* e = entry("synthetic", "context_noise"))
    cfg.synthetic.context_noise = detail::entry_double(*e, "context_noise");

  if (const auto* e = entry("theory", "families")) {
    for (const auto& piece : detail::split(e->value, '|'))
      if (!piece.empty()) cfg.theory_families.push_back(parse_distribution(piece));
  }
  if (const auto* e = entry("theory", "k_min"))
    cfg.theory_k_min = detail::entry_int(*e, "k_min");
  if (const auto* e = entry("theory", "k_max"))
    cfg.theory_k_max = detail::entry_int(*e, "k_max");
  if (const auto* e = entry("theory", "instances"))
    cfg.theory_instances = detail::entry_int(*e, "instances");

  cfg.synthetic.separation_threshold = cfg.cluster_threshold;
  cfg.validate();
  return cfg;
}

inline campaign_config load_campaign_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return campaign_from_ini(buf.str());
}

}  // namespace camd
