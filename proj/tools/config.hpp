#pragma once

// JSON configuration, ledger and claim-batch files for the command-line tool.

#include <cstdint>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "pension/pension.hpp"

namespace pension::cli {

using Json = nlohmann::ordered_json;

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

template <class T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  return j.at(key).get<T>();
}

/// A number applies to every individual, an array gives one value each.
inline std::vector<double> per_individual(const Json& j, const char* key, std::size_t n,
                                          double fallback) {
  if (!j.contains(key)) return std::vector<double>(n, fallback);
  const Json& v = j.at(key);
  if (v.is_number()) return std::vector<double>(n, v.get<double>());
  auto out = v.get<std::vector<double>>();
  if (out.size() != n) throw InputError(std::string("pool.") + key + ": expected " +
                                        std::to_string(n) + " entries");
  return out;
}

struct PoolSetup {
  PoolConfig config;
  std::vector<double> values;
  std::vector<double> k;
  double collective = 0.0;
};

struct FixedPointSetup {
  std::optional<double> eta_total;
  std::optional<double> theta;
  double tol = 1e-6;
  int max_iter = 100;
};

struct ExperimentConfig {
  GbmParams market;
  CorridorPolicy policy;
  XiParams xi;
  GridOptions grid;
  std::optional<double> c;  // evaluate N(c, .) in `optimize`
  std::optional<PoolSetup> pool;
  FixedPointSetup fixed_point;
  int paths = 10000;
  unsigned threads = 0;
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string ledger;
  std::string batch;
};

inline ExperimentConfig parse_config(const Json& root) {
  ExperimentConfig cfg;
  try {
    const Json market = get_or(root, "market", Json::object());
    cfg.market.mu = get_or(market, "mu", 0.0);
    cfg.market.sigma = get_or(market, "sigma", 1.0);
    cfg.market.x0 = get_or(market, "x0", 0.0);

    const Json policy = get_or(root, "policy", Json::object());
    cfg.policy.k = get_or(policy, "k", 0.0);
    cfg.policy.p = get_or(policy, "p", 1.0);
    cfg.policy.give_frac = get_or(policy, "give_frac", 0.25);
    cfg.policy.help_frac = get_or(policy, "help_frac", 0.5);
    cfg.policy.alpha = get_or(policy, "alpha", 0.0);
    cfg.policy.J = get_or(policy, "J", 0.0);

    const Json xi = get_or(root, "xi", Json::object());
    cfg.xi.a = get_or(xi, "a", 2.0);
    cfg.xi.b = get_or(xi, "b", 4.0);

    const Json opt = get_or(root, "optimizer", Json::object());
    cfg.grid.points = get_or(opt, "grid", 2001);
    cfg.grid.tol = get_or(opt, "tol", 1e-10);
    cfg.grid.tie_tolerance = get_or(opt, "tie_tolerance", 1e-6);
    if (opt.contains("c")) cfg.c = opt.at("c").get<double>();

    if (root.contains("pool")) {
      const Json& p = root.at("pool");
      PoolSetup s;
      const auto n = get_or<std::size_t>(p, "n", 1);
      if (n < 1) throw InputError("pool.n must be >= 1");
      s.config.gamma = get_or(p, "gamma", 1.0);
      s.config.premiums = per_individual(p, "pi_ind", n, 0.0);
      if (p.contains("pi_all")) s.config.pi_all = p.at("pi_all").get<double>();
      s.config.T = get_or(p, "T", 1);
      const auto regime = parse_regime(get_or<std::string>(p, "regime", "AlwaysHelp"));
      if (!regime) throw InputError("pool.regime: unknown regime");
      s.config.regime = *regime;
      s.config.policy = cfg.policy;
      if (p.contains("index_weights"))
        s.config.index_weights = p.at("index_weights").get<std::vector<double>>();
      s.values = per_individual(p, "initial_values", n, 1.0);
      s.k = per_individual(p, "k", n, cfg.policy.k);
      s.collective = get_or(p, "collective", 0.0);
      cfg.pool = std::move(s);
    }

    const Json fp = get_or(root, "fixed_point", Json::object());
    if (fp.contains("eta_total")) cfg.fixed_point.eta_total = fp.at("eta_total").get<double>();
    if (fp.contains("theta")) cfg.fixed_point.theta = fp.at("theta").get<double>();
    cfg.fixed_point.tol = get_or(fp, "tol", 1e-6);
    cfg.fixed_point.max_iter = get_or(fp, "max_iter", 100);

    const Json sim = get_or(root, "simulation", Json::object());
    cfg.paths = get_or(sim, "paths", 10000);
    cfg.threads = get_or(sim, "threads", 0u);

    cfg.seed = get_or<std::uint64_t>(root, "seed", 0);
    cfg.out = get_or<std::string>(root, "output", "out");
    cfg.ledger = get_or<std::string>(root, "ledger", "");
    cfg.batch = get_or<std::string>(root, "batch", "");
  } catch (const Json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return cfg;
}

/// Checks every parameter invariant that does not depend on the command.
inline void validate(const ExperimentConfig& cfg) {
  cfg.market.validate();
  cfg.policy.validate();
  if (cfg.grid.points < 100) throw std::invalid_argument("optimizer.grid must be >= 100");
  if (!(cfg.grid.tol > 0.0)) throw std::invalid_argument("optimizer.tol must be positive");
  if (!(cfg.grid.tie_tolerance >= 0.0))
    throw std::invalid_argument("optimizer.tie_tolerance must be >= 0");
  if (cfg.paths < 1) throw std::invalid_argument("simulation.paths must be >= 1");
  if (cfg.pool) cfg.pool->config.validate(cfg.pool->values.size());
}

// ---------------------------------------------------------------------------
// Ledger files: {"rule": "proportional"|"monotone", "normalization": 100,
// "rate": a, "events": [{"t", "contributions": {id: amount}, "C_pre",
// "rate"?, "rates"?: {id: a}}]}

struct LedgerFile {
  IndexRule rule = IndexRule::Proportional;
  double normalization = 100.0;
  double rate = 0.0;
  Json events = Json::array();
};

inline LedgerFile parse_ledger_file(const Json& root) {
  LedgerFile f;
  try {
    const auto rule = get_or<std::string>(root, "rule", "proportional");
    if (rule == "proportional") {
      f.rule = IndexRule::Proportional;
    } else if (rule == "monotone") {
      f.rule = IndexRule::Monotone;
    } else {
      throw InputError("ledger: unknown rule " + rule);
    }
    f.normalization = get_or(root, "normalization", 100.0);
    f.rate = get_or(root, "rate", 0.0);
    f.events = get_or(root, "events", Json::array());
    if (!f.events.is_array()) throw InputError("ledger: events must be an array");
  } catch (const Json::exception& e) {
    throw InputError(std::string("ledger: ") + e.what());
  }
  return f;
}

inline void apply_event(Ledger& ledger, const LedgerFile& f, const Json& ev) {
  try {
    Ledger::Contributions contributions;
    for (const auto& [id, amount] : ev.at("contributions").items())
      contributions.emplace_back(id, amount.get<double>());
    Ledger::Rates overrides;
    if (ev.contains("rates"))
      for (const auto& [id, a] : ev.at("rates").items()) overrides[id] = a.get<double>();
    ledger.update(ev.at("t").get<int>(), get_or(ev, "C_pre", 0.0), contributions,
                  get_or(ev, "rate", f.rate), overrides);
  } catch (const Json::exception& e) {
    throw InputError(std::string("ledger event: ") + e.what());
  }
}

inline Ledger build_ledger(const LedgerFile& f) {
  if (f.events.empty()) throw InputError("ledger: no events");
  Ledger ledger(f.rule, f.normalization);
  for (const auto& ev : f.events) apply_event(ledger, f, ev);
  return ledger;
}

inline Json ledger_file_json(const LedgerFile& f) {
  Json out;
  out["rule"] = f.rule == IndexRule::Proportional ? "proportional" : "monotone";
  out["normalization"] = f.normalization;
  out["rate"] = f.rate;
  out["events"] = f.events;
  return out;
}

// ---------------------------------------------------------------------------
// Claim batches: {"claims": [...], "indices": [...], "pool": number}

struct ClaimBatch {
  std::vector<double> claims;
  std::vector<double> indices;
  double pool = 0.0;
};

inline ClaimBatch parse_batch(const Json& root) {
  try {
    return {root.at("claims").get<std::vector<double>>(),
            root.at("indices").get<std::vector<double>>(), root.at("pool").get<double>()};
  } catch (const Json::exception& e) {
    throw InputError(std::string("batch: ") + e.what());
  }
}

}  // namespace pension::cli
