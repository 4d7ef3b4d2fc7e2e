// pension-cli: corridor analysis, pool simulation, claim settlement and
// redistribution ledgers from JSON configuration files.
//
// Exit codes: 0 success, 1 numerical non-convergence, 2 invalid input,
// 3 internal error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "pension/pension.hpp"

namespace fs = std::filesystem;
using namespace pension;
using namespace pension::cli;

namespace {

struct NonConvergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> grid;
  std::optional<int> paths;
};

ExperimentConfig load(const Overrides& o) {
  ExperimentConfig cfg = o.config.empty() ? parse_config(Json::object())
                                          : parse_config(read_json(o.config));
  if (o.seed) cfg.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.grid) cfg.grid.points = *o.grid;
  if (o.paths) cfg.paths = *o.paths;
  validate(cfg);
  return cfg;
}

fs::path output_file(const ExperimentConfig& cfg, const std::string& name) {
  fs::create_directories(cfg.out);
  return fs::path(cfg.out) / name;
}

void write_json(const ExperimentConfig& cfg, const std::string& name, const Json& j) {
  std::ofstream(output_file(cfg, name)) << j.dump(2) << '\n';
}

std::ofstream open_csv(const ExperimentConfig& cfg, const std::string& name,
                       const std::string& header) {
  std::ofstream os(output_file(cfg, name));
  os.precision(12);
  os << header << '\n';
  return os;
}

Json market_json(const GbmParams& g) { return {{"mu", g.mu}, {"sigma", g.sigma}, {"x0", g.x0}}; }

Json policy_json(const CorridorPolicy& p) {
  return {{"k", p.k},         {"p", p.p},         {"give_frac", p.give_frac},
          {"help_frac", p.help_frac}, {"alpha", p.alpha}, {"J", p.J}};
}

double grid_k(int i, int points) { return i == points - 1 ? 1.0 : static_cast<double>(i) / (points - 1); }

Json choice_json(const BoundaryChoice& c) {
  Json j = {{"k", c.k}, {"value", c.value}, {"tie", c.tie}};
  j["modes"] = Json::array();
  for (const auto& m : c.modes) j["modes"].push_back({{"k", m.x}, {"value", m.value}});
  if (c.tie) {
    j["tied"] = Json::array();
    for (const auto& m : c.tied) j["tied"].push_back({{"k", m.x}, {"value", m.value}});
    j["m1_slope_low"] = c.m1_slope_low;
    j["m1_slope_high"] = c.m1_slope_high;
  }
  return j;
}

// ---------------------------------------------------------------------------

int cmd_profitability(const ExperimentConfig& cfg) {
  const auto& g = cfg.market;
  const auto& pol = cfg.policy;
  auto csv = open_csv(cfg, "profitability.csv", "k,lhs,admissible");
  for (int i = 0; i < cfg.grid.points; ++i) {
    const double k = grid_k(i, cfg.grid.points);
    const double lhs = profitability_lhs(g, pol.with_k(k));
    csv << k << ',' << lhs << ',' << (lhs <= 0.0 ? 1 : 0) << '\n';
  }
  const auto k_min = admissible_min_k(g, pol);
  Json j;
  j["market"] = market_json(g);
  j["policy"] = policy_json(pol);
  j["k_min"] = k_min ? Json(*k_min) : Json(nullptr);
  j["admissible_intervals"] = Json::array();
  for (const auto& [a, b] : admissible_intervals(g, pol, cfg.grid.points))
    j["admissible_intervals"].push_back({a, b});
  j["stationary_points"] = Json::array();
  for (const auto& s : m1_stationary_points(g, pol)) {
    const double lhs = profitability_lhs(g, pol.with_k(s.k));
    j["stationary_points"].push_back({{"k", s.k},
                                      {"upper", s.k * pol.p},
                                      {"is_max", s.is_max},
                                      {"lhs", lhs},
                                      {"admissible", lhs <= 0.0}});
  }
  write_json(cfg, "profitability.json", j);

  std::cout << "k_min: " << (k_min ? std::to_string(*k_min) : "none") << '\n';
  for (const auto& iv : j["admissible_intervals"])
    std::cout << "admissible on [" << iv[0].get<double>() << ", " << iv[1].get<double>() << "]\n";
  for (const auto& s : j["stationary_points"])
    std::cout << "stationary point of M_p at k=" << s["k"].get<double>()
              << (s["admissible"].get<bool>() ? " (admissible)" : " (inadmissible)") << '\n';
  return 0;
}

int cmd_optimize(const ExperimentConfig& cfg) {
  const auto& g = cfg.market;
  const auto& pol = cfg.policy;
  const auto k_min = admissible_min_k(g, pol);
  if (!k_min) throw std::domain_error("no admissible k");

  std::string header = "k,m1,m2,lhs,admissible";
  if (cfg.c) header += ",n_c";
  auto csv = open_csv(cfg, "optimize.csv", header);
  for (int i = 0; i < cfg.grid.points; ++i) {
    const double k = grid_k(i, cfg.grid.points);
    const auto at = pol.with_k(k);
    const double lhs = profitability_lhs(g, at);
    csv << k << ',' << m1(g, at) << ',' << m2(g, pol, k) << ',' << lhs << ','
        << (lhs <= 0.0 ? 1 : 0);
    if (cfg.c) csv << ',' << n_func(g, pol, *cfg.c, k);
    csv << '\n';
  }

  const auto r1 = maximize_m1(g, pol, *k_min);
  const auto r2 = maximize_m2(g, pol, *k_min, cfg.grid);
  Json j;
  j["market"] = market_json(g);
  j["policy"] = policy_json(pol);
  j["k_min"] = *k_min;
  j["m1"] = {{"k", r1.k}, {"value_at_k_min", r1.value_at_min}, {"value_at_one", r1.value_at_one}};
  j["m2"] = choice_json(r2);
  if (cfg.c) {
    j["n"] = choice_json(k_of_c(g, pol, *cfg.c, *k_min, cfg.grid));
    j["n"]["c"] = *cfg.c;
  }
  write_json(cfg, "optimize.json", j);

  std::cout << "M1 maximiser: k=" << r1.k << '\n';
  std::cout << "M2 maximiser: k=" << r2.k << " value=" << r2.value << " tie=" << r2.tie << '\n';
  if (r2.tie)
    for (const auto& m : r2.tied) std::cout << "  tied at k=" << m.x << " value=" << m.value << '\n';
  return 0;
}

const PoolSetup& require_pool(const ExperimentConfig& cfg) {
  if (!cfg.pool) throw InputError("config has no pool section");
  return *cfg.pool;
}

int cmd_simulate(const ExperimentConfig& cfg) {
  const auto& pool = require_pool(cfg);
  const auto initial = PoolState::make(cfg.market, pool.values, pool.k, pool.collective);
  const auto summary = simulate(pool.config, cfg.market, initial, cfg.paths, cfg.seed, cfg.threads);

  // The logged trajectory is Monte Carlo path 0.
  ReturnSampler sampler(cfg.market, derive_seed(cfg.seed, 0));
  std::vector<double> ys(static_cast<std::size_t>(pool.config.T));
  for (auto& y : ys) y = sampler.next();
  const auto path = run_path(initial, pool.config, ys);
  {
    std::ofstream os(output_file(cfg, "steps.csv"));
    write_step_log(os, path.reports);
  }

  Json j;
  j["market"] = market_json(cfg.market);
  j["regime"] = to_string(pool.config.regime);
  j["paths"] = summary.n_paths;
  j["T"] = summary.T;
  j["seed"] = cfg.seed;
  j["mean_terminal"] = summary.mean_terminal;
  j["penalized"] = summary.penalized;
  j["mean_variation"] = summary.mean_variation;
  j["shortfall_frequency"] = summary.shortfall_frequency;
  j["claim_frequency"] = summary.claim_frequency;
  j["mean_external_support"] = summary.mean_external_support;
  j["mean_collective"] = summary.mean_collective;
  j["accounts"] = Json::array();
  for (const auto& a : summary.accounts)
    j["accounts"].push_back({{"mean_terminal", a.mean_terminal},
                             {"se_terminal", a.se_terminal},
                             {"mean_variation", a.mean_variation},
                             {"penalized", a.penalized},
                             {"se_penalized", a.se_penalized}});
  write_json(cfg, "simulate.json", j);

  std::cout << "E[V_T] (pool average): " << summary.mean_terminal << '\n'
            << "penalized target: " << summary.penalized << '\n'
            << "shortfall frequency: " << summary.shortfall_frequency << '\n'
            << "external support: " << summary.mean_external_support << '\n';
  return 0;
}

int cmd_fixed_point(const ExperimentConfig& cfg) {
  double eta_total = 0.0;
  double theta = 0.0;
  std::optional<PoolState> state;
  if (cfg.pool) {
    state = PoolState::make(cfg.market, cfg.pool->values, cfg.pool->k, cfg.pool->collective);
    for (double e : state->etas()) eta_total += e;
    theta = state->collective.theta;
  }
  if (cfg.fixed_point.eta_total) eta_total = *cfg.fixed_point.eta_total;
  if (cfg.fixed_point.theta) theta = *cfg.fixed_point.theta;
  if (!cfg.pool && !(cfg.fixed_point.eta_total && cfg.fixed_point.theta))
    throw InputError("fixed-point needs a pool section or fixed_point.eta_total and theta");

  const auto r = fixed_point_barriers(cfg.market, cfg.policy, eta_total, theta,
                                      cfg.fixed_point.tol, cfg.fixed_point.max_iter, cfg.grid);
  auto csv = open_csv(cfg, "fixed_point.csv", "iteration,c,k");
  for (std::size_t i = 0; i < r.trace.size(); ++i)
    csv << i + 1 << ',' << r.trace[i].first << ',' << r.trace[i].second << '\n';

  Json j;
  j["k"] = r.k;
  j["c"] = r.c;
  j["value"] = r.value;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["cycle"] = r.cycle;
  j["eta_total"] = eta_total;
  j["theta"] = theta;
  if (state) {
    j["improvement_bounds"] = Json::array();
    const auto eta = state->etas();
    for (std::size_t i = 0; i < eta.size(); ++i)
      j["improvement_bounds"].push_back(improvement_bound(i, eta, theta, cfg.policy, cfg.market));
  }
  write_json(cfg, "fixed_point.json", j);

  std::cout << "k-bar=" << r.k << " c=" << r.c << " iterations=" << r.iterations
            << (r.converged ? "" : r.cycle ? " (2-cycle)" : " (not converged)") << '\n';
  if (!r.converged) throw NonConvergence("fixed-point iteration did not converge");
  return 0;
}

int cmd_settle(const ExperimentConfig& cfg, const std::string& batch_path) {
  const std::string path = batch_path.empty() ? cfg.batch : batch_path;
  if (path.empty()) throw InputError("settle needs --batch FILE");
  const auto batch = parse_batch(read_json(path));
  const auto s = settle(batch.claims, batch.indices, batch.pool);

  auto csv = open_csv(cfg, "settlement.csv", "j,claim,index,allocation");
  for (std::size_t i = 0; i < batch.claims.size(); ++i)
    csv << i << ',' << batch.claims[i] << ',' << batch.indices[i] << ',' << s.allocations[i] << '\n';
  Json j = {{"allocations", s.allocations}, {"remaining", s.remaining}, {"rounds", s.rounds}};
  write_json(cfg, "settlement.json", j);

  std::cout << "allocations:";
  for (double a : s.allocations) std::cout << ' ' << a;
  std::cout << "\nremaining: " << s.remaining << '\n';
  return 0;
}

struct IndexArgs {
  std::string verb;
  std::string ledger;
  std::optional<std::string> add_id;
  std::optional<int> add_t;
  std::optional<double> add_amount;
  std::optional<int> t;
  std::optional<double> c_pre;
  std::vector<std::string> contrib;
  std::optional<double> rate;
  bool literal_lin = false;
};

Json witness_json(const RuleCheck& c) {
  Json j = {{"rule", c.rule}, {"pass", c.pass}};
  if (c.witness)
    j["witness"] = {{"event_time", c.witness->event_time}, {"share_time", c.witness->share_time},
                    {"id", c.witness->id},                 {"other_id", c.witness->other_id},
                    {"lhs", c.witness->lhs},               {"rhs", c.witness->rhs}};
  return j;
}

void write_ledger_outputs(const ExperimentConfig& cfg, const Ledger& ledger) {
  auto csv = open_csv(cfg, "ledger.csv", "t,id,contribution,C_pre,C_post,index,share");
  Json events = Json::array();
  for (const auto& rec : ledger.records()) {
    Json e = {{"t", rec.t}, {"C_pre", rec.C_pre}, {"C_post", rec.C_post}};
    for (std::size_t j = 0; j < rec.index_after.size(); ++j) {
      const auto& id = ledger.ids()[j];
      csv << rec.t << ',' << id << ',' << rec.contributions[j] << ',' << rec.C_pre << ','
          << rec.C_post << ',' << rec.index_after[j] << ',' << rec.shares_after[j] << '\n';
      e["index"][id] = rec.index_after[j];
      e["shares"][id] = rec.shares_after[j];
    }
    events.push_back(e);
  }
  write_json(cfg, "ledger_state.json",
             {{"ids", ledger.ids()}, {"events", events}, {"route_gap", ledger.max_route_gap()}});
}

int cmd_index(const ExperimentConfig& cfg, const IndexArgs& a) {
  const std::string path = a.ledger.empty() ? cfg.ledger : a.ledger;
  if (path.empty()) throw InputError("index needs --ledger FILE");
  LedgerFile file = parse_ledger_file(read_json(path));

  if (a.verb == "update") {
    if (!a.t || a.contrib.empty()) throw InputError("index update needs --t and --contrib");
    Json ev;
    ev["t"] = *a.t;
    ev["C_pre"] = a.c_pre.value_or(0.0);
    ev["contributions"] = Json::object();
    for (const auto& item : a.contrib) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw InputError("--contrib expects id=amount");
      try {
        ev["contributions"][item.substr(0, eq)] = std::stod(item.substr(eq + 1));
      } catch (const std::exception&) {
        throw InputError("--contrib: bad amount in " + item);
      }
    }
    if (a.rate) ev["rate"] = *a.rate;
    file.events.push_back(ev);
    const Ledger ledger = build_ledger(file);
    write_json(cfg, "ledger.json", ledger_file_json(file));
    write_ledger_outputs(cfg, ledger);
    std::cout << "shares after t=" << *a.t << ':';
    for (double s : ledger.shares()) std::cout << ' ' << s;
    std::cout << '\n';
    return 0;
  }

  const Ledger ledger = build_ledger(file);
  if (a.verb == "show") {
    write_ledger_outputs(cfg, ledger);
    for (std::size_t j = 0; j < ledger.ids().size(); ++j)
      std::cout << ledger.ids()[j] << ": index " << ledger.indices()[j] << " share "
                << ledger.shares()[j] << '\n';
    return 0;
  }

  NewContributor<double> newcomer;
  newcomer.id = a.add_id.value_or("new");
  newcomer.t = a.add_t.value_or(ledger.records().back().t);
  if (a.add_amount) {
    newcomer.amount = *a.add_amount;
  } else {
    double total = 0.0;
    int count = 0;
    for (const auto& rec : ledger.records())
      for (double x : rec.contributions)
        if (x > 0.0) total += x, ++count;
    newcomer.amount = total / count;
  }
  const std::vector<RuleCheck> checks = {check_cont(ledger), check_fix(ledger), check_mon(ledger),
                                         check_add(ledger, newcomer),
                                         check_lin(ledger, a.literal_lin)};
  Json j = Json::array();
  for (const auto& c : checks) {
    j.push_back(witness_json(c));
    std::cout << c.rule << ' ' << (c.pass ? "PASS" : "FAIL");
    if (c.witness)
      std::cout << " at t=" << c.witness->share_time << " (" << c.witness->id
                << (c.witness->other_id.empty() ? "" : ", " + c.witness->other_id) << ')';
    std::cout << '\n';
  }
  write_json(cfg, "ledger_checks.json", {{"checks", j}});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Corridor smoothing, pool simulation and redistribution ledgers"};
  app.require_subcommand(1);
  app.fallthrough();
  Overrides o;
  app.add_option("--config", o.config, "JSON configuration file");
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--grid", o.grid, "Grid points for k");
  app.add_option("--paths", o.paths, "Monte Carlo paths");

  auto* profitability = app.add_subcommand("profitability", "Profitability condition on a k grid");
  auto* optimize = app.add_subcommand("optimize", "M1 / M2 curves and their maximisers");
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo pool simulation");
  auto* fixed_point = app.add_subcommand("fixed-point", "Common barrier by fixed-point iteration");
  auto* settle_cmd = app.add_subcommand("settle", "Recursive claim settlement");
  std::string batch;
  settle_cmd->add_option("--batch", batch, "Claim batch JSON");
  auto* index = app.add_subcommand("index", "Redistribution index ledger");
  IndexArgs ia;
  index->add_option("verb", ia.verb, "show | check | update")
      ->required()
      ->check(CLI::IsMember({"show", "check", "update"}));
  index->add_option("--ledger", ia.ledger, "Ledger JSON");
  index->add_option("--add-id", ia.add_id, "check: id of the added contributor");
  index->add_option("--add-t", ia.add_t, "check: event time of the added contributor");
  index->add_option("--add-amount", ia.add_amount, "check: contribution of the added contributor");
  index->add_flag("--literal-lin", ia.literal_lin, "check: Lin with unit factor on prior shares");
  index->add_option("--t", ia.t, "update: event time");
  index->add_option("--c-pre", ia.c_pre, "update: collective value before contributions");
  index->add_option("--contrib", ia.contrib, "update: id=amount (repeatable)");
  index->add_option("--rate", ia.rate, "update: artificial interest (monotone rule)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const ExperimentConfig cfg = load(o);
    if (*profitability) return cmd_profitability(cfg);
    if (*optimize) return cmd_optimize(cfg);
    if (*simulate_cmd) return cmd_simulate(cfg);
    if (*fixed_point) return cmd_fixed_point(cfg);
    if (*settle_cmd) return cmd_settle(cfg, batch);
    if (*index) return cmd_index(cfg, ia);
  } catch (const NonConvergence& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const Json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return 2;
}
