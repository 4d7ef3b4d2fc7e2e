#pragma once

// Pool of individual accounts sharing one collective account, all invested
// in the same fund. One step applies fund growth, premium payments and the
// corridor transfers, where help for losses below the corridor is limited
// according to the chosen regime.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pension/corridor.hpp"
#include "pension/market_model.hpp"
#include "pension/optimize.hpp"
#include "pension/parallel.hpp"
#include "pension/settlement.hpp"

namespace pension {

enum class Regime { AlwaysHelp, NoHelpIfInsufficient, IndexCappedHelp };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::AlwaysHelp: return "AlwaysHelp";
    case Regime::NoHelpIfInsufficient: return "NoHelpIfInsufficient";
    case Regime::IndexCappedHelp: return "IndexCappedHelp";
  }
  return "unknown";
}

inline std::optional<Regime> parse_regime(const std::string& s) {
  for (Regime r : {Regime::AlwaysHelp, Regime::NoHelpIfInsufficient, Regime::IndexCappedHelp})
    if (to_string(r) == s) return r;
  return std::nullopt;
}

struct IndividualAccount {
  int owner_id = 0;
  double eta = 0.0;    // fund shares
  double value = 0.0;  // eta * H
  double k = 0.0;      // corridor boundary
};

struct CollectiveAccount {
  double theta = 0.0;  // fund shares; negative only as a deficit under AlwaysHelp
  double value = 0.0;
};

struct PoolConfig {
  double gamma = 1.0;                 // share of each premium kept individually
  std::vector<double> premiums;       // premium per individual and period; empty = none
  std::optional<double> pi_all;       // total premia; defaults to the sum of `premiums`
  int T = 1;
  Regime regime = Regime::AlwaysHelp;
  CorridorPolicy policy;              // fractions, p and alpha; k lives in the accounts
  std::vector<double> index_weights;  // fixed weights for IndexCappedHelp, else tracked

  void validate(std::size_t n) const {
    if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("PoolConfig: gamma outside [0,1]");
    if (!premiums.empty() && premiums.size() != n)
      throw std::invalid_argument("PoolConfig: one premium per individual required");
    for (double p : premiums)
      if (!(p >= 0.0)) throw std::invalid_argument("PoolConfig: negative premium");
    if (pi_all && !(*pi_all >= 0.0)) throw std::invalid_argument("PoolConfig: negative pi_all");
    if (T < 1) throw std::invalid_argument("PoolConfig: T must be >= 1");
    policy.validate();
    if (!index_weights.empty()) {
      if (index_weights.size() != n)
        throw std::invalid_argument("PoolConfig: one index weight per individual required");
      double total = 0.0;
      for (double w : index_weights) {
        if (!(w >= 0.0)) throw std::invalid_argument("PoolConfig: negative index weight");
        total += w;
      }
      if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("PoolConfig: index weights must sum to 1");
    }
  }

  double premium(std::size_t j) const { return premiums.empty() ? 0.0 : premiums[j]; }

  double total_premium() const {
    if (pi_all) return *pi_all;
    double total = 0.0;
    for (double p : premiums) total += p;
    return total;
  }

  /// (1 - gamma) pi_all split by premium size: the collective contributions.
  std::vector<double> collective_contributions(std::size_t n) const {
    const double pot = (1.0 - gamma) * total_premium();
    double total = 0.0;
    for (double p : premiums) total += p;
    std::vector<double> out(n, n ? pot / static_cast<double>(n) : 0.0);
    if (total > 0.0)
      for (std::size_t j = 0; j < n; ++j) out[j] = pot * premiums[j] / total;
    return out;
  }
};

struct PoolState {
  int t = 0;
  double price = 1.0;  // H_t
  std::vector<IndividualAccount> individuals;
  CollectiveAccount collective;
  double external_support = 0.0;     // help paid beyond the collective's funds
  std::vector<double> index_shares;  // tracked shares of the collective, lagged

  static PoolState make(const GbmParams& params, const std::vector<double>& values,
                        const std::vector<double>& k, double collective_value) {
    params.validate();
    if (values.size() != k.size()) throw std::invalid_argument("PoolState: size mismatch");
    if (!(collective_value >= 0.0)) throw std::invalid_argument("PoolState: negative collective");
    PoolState s;
    s.price = params.initial_price();
    double total = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (!(values[j] >= 0.0)) throw std::invalid_argument("PoolState: negative account value");
      if (!(k[j] >= 0.0 && k[j] <= 1.0)) throw std::invalid_argument("PoolState: k outside [0,1]");
      s.individuals.push_back({static_cast<int>(j), values[j] / s.price, values[j], k[j]});
      total += values[j];
    }
    s.collective = {collective_value / s.price, collective_value};
    const std::size_t n = values.size();
    s.index_shares.assign(n, n ? 1.0 / static_cast<double>(n) : 0.0);
    if (total > 0.0)
      for (std::size_t j = 0; j < n; ++j) s.index_shares[j] = values[j] / total;
    return s;
  }

  std::vector<double> etas() const {
    std::vector<double> out;
    for (const auto& a : individuals) out.push_back(a.eta);
    return out;
  }

  std::vector<double> boundaries() const {
    std::vector<double> out;
    for (const auto& a : individuals) out.push_back(a.k);
    return out;
  }
};

struct AccountReport {
  int owner_id = 0;
  double value = 0.0;
  double eta = 0.0;
  double claim = 0.0;           // help requested (currency)
  double transfer_value = 0.0;  // help received minus surplus given (currency)
  double transfer_units = 0.0;  // the same in fund shares at the new price
  bool help_granted = false;
};

struct StepReport {
  int t = 0;
  double gross_return = 1.0;
  double price = 1.0;
  bool indicator = true;  // theta_{t-1} H_t > sum of claims
  bool shortfall = false;  // claims present and indicator false
  double z_star = -1.0;
  double total_claims = 0.0;
  double total_give = 0.0;
  double total_help = 0.0;
  double external_support = 0.0;  // added in this step
  double theta = 0.0;
  double collective = 0.0;
  std::vector<AccountReport> accounts;
};

// ---------------------------------------------------------------------------
// Coverage threshold

namespace detail {

inline void check_pool_vectors(const std::vector<double>& k, const std::vector<double>& eta,
                               double theta) {
  if (k.size() != eta.size()) throw std::invalid_argument("pool vectors differ in length");
  if (!(theta >= 0.0)) throw std::invalid_argument("theta must be >= 0");
  for (std::size_t j = 0; j < k.size(); ++j) {
    if (!(k[j] >= 0.0 && k[j] <= 1.0)) throw std::invalid_argument("k outside [0,1]");
    if (!(eta[j] >= 0.0)) throw std::invalid_argument("eta must be >= 0");
  }
}

}  // namespace detail

/// theta (1 + rho) >= help_frac * sum eta^i (-k^i - rho)^+, i.e. the collective
/// covers every claim after a return rho. `strict` uses '>'.
inline bool coverage_indicator(const std::vector<double>& k, const std::vector<double>& eta,
                               double theta, double rho, double help_frac = 0.5,
                               bool strict = false) {
  double need = 0.0;
  for (std::size_t i = 0; i < k.size(); ++i) need += eta[i] * std::max(-k[i] - rho, 0.0);
  const double lhs = theta * (1.0 + rho);
  const double rhs = help_frac * need;
  return strict ? lhs > rhs : lhs >= rhs;
}

/// Return threshold z* in [-1, 0] with coverage_indicator(rho) = 1{rho >= z*}.
inline double z_star(const std::vector<double>& k, const std::vector<double>& eta, double theta,
                     double help_frac = 0.5) {
  detail::check_pool_vectors(k, eta, theta);
  if (!(help_frac > 0.0)) return -1.0;
  const double c = theta / help_frac;
  // j is active iff the indicator still holds at rho = -k^j, i.e.
  //   c (1 - k^j) >= sum_i eta^i (k^j - k^i)^+.
  // With boundaries sorted the right side is k^j E_< - (eta k)_< over the
  // strictly smaller boundaries.
  std::vector<std::size_t> order(k.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return k[a] < k[b]; });
  double num = c;
  double den = c;
  double eta_below = 0.0;
  double eta_k_below = 0.0;
  for (std::size_t pos = 0; pos < order.size();) {
    std::size_t end = pos;
    double eta_tie = 0.0;
    double eta_k_tie = 0.0;
    const double kj = k[order[pos]];
    for (; end < order.size() && k[order[end]] == kj; ++end) {
      eta_tie += eta[order[end]];
      eta_k_tie += eta[order[end]] * kj;
    }
    if (c * (1.0 - kj) - (kj * eta_below - eta_k_below) >= 0.0) {
      num += eta_k_tie;
      den += eta_tie;
    }
    eta_below += eta_tie;
    eta_k_below += eta_k_tie;
    pos = end;
  }
  if (!(den > 0.0)) return -1.0;
  return std::clamp(-num / den, -1.0, 0.0);
}

/// z* when every individual uses the same boundary k.
inline double z_common(double k, double eta_total, double theta, double help_frac = 0.5) {
  if (!(help_frac > 0.0)) return -1.0;
  const double c = theta / help_frac;
  const double den = c + eta_total;
  if (!(den > 0.0)) return -1.0;
  return std::clamp(-(c + k * eta_total) / den, -1.0, 0.0);
}

// ---------------------------------------------------------------------------
// One period

struct StepOutcome {
  PoolState state;
  StepReport report;
};

inline StepOutcome step(const PoolState& s, double gross_return, const PoolConfig& cfg) {
  if (!(gross_return > 0.0)) throw std::domain_error("step: gross return must be positive");
  const std::size_t n = s.individuals.size();
  cfg.validate(n);
  const CorridorPolicy& pol = cfg.policy;
  const double rho = gross_return - 1.0;
  const double price = s.price * gross_return;

  std::vector<double> give(n, 0.0), claim(n, 0.0), help(n, 0.0);
  double total_claims = 0.0;
  double total_give = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const auto& acc = s.individuals[j];
    if (rho > acc.k * pol.p) {
      give[j] = pol.give_frac * acc.value * (rho - acc.k * pol.p);
      total_give += give[j];
    } else if (rho < -acc.k) {
      claim[j] = pol.help_frac * acc.value * (-acc.k - rho);
      total_claims += claim[j];
    }
  }

  const double cover = s.collective.theta * price;  // theta_{t-1} H_t
  const bool indicator = cover > total_claims;

  switch (cfg.regime) {
    case Regime::AlwaysHelp:
      help = claim;
      break;
    case Regime::NoHelpIfInsufficient:
      if (indicator) help = claim;
      break;
    case Regime::IndexCappedHelp: {
      if (indicator) {
        help = claim;
        break;
      }
      std::vector<double> w = cfg.index_weights.empty() ? s.index_shares : cfg.index_weights;
      double w_total = 0.0;
      for (double x : w) w_total += x;
      if (!(w_total > 0.0)) w.assign(n, 1.0 / static_cast<double>(n));
      // Everyone first receives up to its index share of the collective ...
      double left = std::max(cover, 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        if (claim[j] > 0.0) help[j] = std::min(w[j] * std::max(cover, 0.0), claim[j]);
        left -= help[j];
      }
      left = std::max(left, 0.0);
      // ... and the unpaid remainder is settled recursively on what is left.
      std::vector<std::size_t> open;
      double open_weight = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (claim[j] - help[j] > 0.0) {
          open.push_back(j);
          open_weight += w[j];
        }
      }
      if (!open.empty() && open_weight > 0.0 && left > 0.0) {
        std::vector<double> rest, idx;
        for (std::size_t j : open) {
          rest.push_back(claim[j] - help[j]);
          idx.push_back(w[j] / open_weight);
        }
        const auto settled = settle(rest, idx, left);
        for (std::size_t m = 0; m < open.size(); ++m) help[open[m]] += settled.allocations[m];
      }
      break;
    }
  }

  StepOutcome out;
  PoolState& next = out.state;
  StepReport& rep = out.report;
  next.t = s.t + 1;
  next.price = price;
  next.individuals = s.individuals;

  double total_help = 0.0;
  for (double h : help) total_help += h;
  const double collective_premium = (1.0 - cfg.gamma) * cfg.total_premium();
  double collective = cover + collective_premium + total_give - total_help;

  double external = 0.0;
  if (cfg.regime == Regime::AlwaysHelp) {
    external = std::max(0.0, total_help - std::max(cover + collective_premium, 0.0));
  } else if (collective < 0.0) {
    const double scale = std::max({1.0, cover, total_help});
    if (collective < -1e-9 * scale)
      throw std::logic_error("step: collective account negative outside AlwaysHelp");
    collective = 0.0;
  }
  next.collective = {collective / price, collective};
  next.external_support = s.external_support + external;

  rep.t = next.t;
  rep.gross_return = gross_return;
  rep.price = price;
  rep.indicator = indicator;
  rep.shortfall = total_claims > 0.0 && !indicator;
  rep.z_star = z_star(s.boundaries(), s.etas(), std::max(s.collective.theta, 0.0), pol.help_frac);
  rep.total_claims = total_claims;
  rep.total_give = total_give;
  rep.total_help = total_help;
  rep.external_support = external;
  rep.theta = next.collective.theta;
  rep.collective = collective;

  for (std::size_t j = 0; j < n; ++j) {
    auto& acc = next.individuals[j];
    const double value =
        s.individuals[j].eta * price + cfg.gamma * cfg.premium(j) - give[j] + help[j];
    if (value < 0.0) throw std::logic_error("step: individual account negative");
    acc.value = value;
    acc.eta = value / price;
    AccountReport ar;
    ar.owner_id = acc.owner_id;
    ar.value = value;
    ar.eta = acc.eta;
    ar.claim = claim[j];
    ar.transfer_value = help[j] - give[j];
    ar.transfer_units = ar.transfer_value / price;
    ar.help_granted = help[j] > 0.0;
    rep.accounts.push_back(ar);
  }

  // Lagged share tracking: contributions (1 - gamma) pi^j join a collective
  // worth theta_{t-1} H_t before they arrive.
  next.index_shares = s.index_shares;
  const auto contrib = cfg.collective_contributions(n);
  double contrib_total = 0.0;
  for (double x : contrib) contrib_total += x;
  if (contrib_total > 0.0) {
    for (std::size_t j = 0; j < n; ++j) {
      next.index_shares[j] = cover > 0.0
                                 ? (s.index_shares[j] * cover + contrib[j]) / (cover + contrib_total)
                                 : contrib[j] / contrib_total;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Common barrier and best responses

struct FixedPointResult {
  double k = 1.0;  // common barrier k-bar
  double c = 0.0;  // z(k-bar)
  double value = 0.0;  // N(c, k-bar)
  int iterations = 0;
  bool converged = false;
  bool cycle = false;
  std::vector<std::pair<double, double>> trace;  // (c_n, k-bar_n)
};

/// Iterates c <- z(k-bar), k-bar <- k(c) from k-bar = 1. A 2-cycle ends the
/// iteration with the member of larger N.
inline FixedPointResult fixed_point_barriers(const GbmParams& params, const CorridorPolicy& policy,
                                             double eta_total, double theta, double tol = 1e-6,
                                             int max_iter = 100, const GridOptions& opt = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("fixed_point_barriers: tol must be positive");
  if (max_iter < 1) throw std::invalid_argument("fixed_point_barriers: max_iter must be >= 1");
  if (!(eta_total >= 0.0) || !(theta >= 0.0))
    throw std::invalid_argument("fixed_point_barriers: negative shares");
  const auto k_min = admissible_min_k(params, policy);
  if (!k_min) throw std::domain_error("fixed_point_barriers: no admissible k");

  auto z = [&](double k) { return z_common(k, eta_total, theta, policy.help_frac); };
  auto value = [&](double k) { return n_func(params, policy, z(k), k); };

  FixedPointResult r;
  double k_bar = 1.0;
  std::optional<double> k_before;
  for (int it = 1; it <= max_iter; ++it) {
    const double c = z(k_bar);
    const double k_next = k_of_c(params, policy, c, *k_min, opt).k;
    r.trace.emplace_back(c, k_next);
    r.iterations = it;
    if (std::abs(k_next - k_bar) < tol) {
      r.k = k_next;
      r.converged = true;
      break;
    }
    if (k_before && std::abs(k_next - *k_before) < tol) {
      r.k = value(k_next) >= value(k_bar) ? k_next : k_bar;
      r.cycle = true;
      break;
    }
    k_before = k_bar;
    k_bar = k_next;
    r.k = k_bar;
  }
  r.c = z(r.k);
  r.value = n_func(params, policy, r.c, r.k);
  return r;
}

/// ||f||_inf (help_frac + alpha) eta^j / (theta / help_frac + sum eta).
inline double improvement_bound(std::size_t j, const std::vector<double>& eta, double theta,
                                const CorridorPolicy& policy, const GbmParams& params) {
  if (j >= eta.size()) throw std::out_of_range("improvement_bound: j out of range");
  if (!(policy.help_frac > 0.0)) return 0.0;
  double total = 0.0;
  for (double e : eta) total += e;
  const double den = theta / policy.help_frac + total;
  if (!(den > 0.0)) return 0.0;
  return density_sup(params) * (policy.help_frac + policy.alpha) * eta[j] / den;
}

struct BestResponse {
  double k = 0.0;
  double value = 0.0;
  double base_value = 0.0;
  double improvement = 0.0;
};

/// Best boundary of individual j when all others keep k_bar. The criterion
/// is N(z*, k^j) with z* recomputed for the deviating profile.
inline BestResponse best_response(const GbmParams& params, const CorridorPolicy& policy,
                                  const std::vector<double>& eta, double theta, std::size_t j,
                                  double k_bar, double k_min, const GridOptions& opt = {}) {
  if (j >= eta.size()) throw std::out_of_range("best_response: j out of range");
  std::vector<double> k(eta.size(), k_bar);
  auto objective = [&](double kj) {
    k[j] = kj;
    return n_func(params, policy, z_star(k, eta, theta, policy.help_frac), kj);
  };
  BestResponse out;
  out.base_value = objective(k_bar);
  auto feasible = [&](double kj) { return is_admissible(params, policy.with_k(kj)); };
  const auto gm = maximize_on_grid(objective, k_min, 1.0, opt, feasible);
  out.k = gm.best.x;
  out.value = gm.best.value;
  out.improvement = std::max(0.0, out.value - out.base_value);
  return out;
}

// ---------------------------------------------------------------------------
// Stationarity check by exhaustive search

struct DpVerdict {
  std::vector<double> best_profile;
  double best_value = 0.0;
  double best_stationary_k = 0.0;
  double best_stationary_value = 0.0;
  bool constant = false;            // best profile uses one k throughout
  bool stationary_optimal = false;  // no profile beats the best constant one
  std::size_t profiles = 0;
};

/// Mean-variance target A(k_1..k_T) = E[V_T] - alpha sum_t E[V_{t-1}] Psi2(k_t)
/// for one individual under unlimited help, evaluated exactly on every
/// profile of admissible grid boundaries.
inline DpVerdict dp_check(const GbmParams& params, const CorridorPolicy& policy, int T,
                          int grid_points = 21, double initial_value = 1.0,
                          double premium = 0.0, double tolerance = 1e-12) {
  if (T < 1 || T > 4) throw std::invalid_argument("dp_check: T must be in 1..4");
  if (grid_points < 2) throw std::invalid_argument("dp_check: grid needs >= 2 points");
  std::vector<double> ks, p1, p2;
  for (int i = 0; i < grid_points; ++i) {
    const double k = static_cast<double>(i) / (grid_points - 1);
    const CorridorPolicy at = policy.with_k(k);
    if (!is_admissible(params, at)) continue;
    ks.push_back(k);
    p1.push_back(psi1(params, at));
    p2.push_back(psi2(params, at));
  }
  if (ks.empty()) throw std::domain_error("dp_check: no admissible grid point");
  const std::size_t g = ks.size();
  std::size_t total = 1;
  for (int t = 0; t < T; ++t) {
    total *= g;
    if (total > 10'000'000) throw std::invalid_argument("dp_check: search space too large");
  }

  auto target = [&](const std::vector<std::size_t>& prof) {
    double mean = initial_value;
    double penalty = 0.0;
    for (std::size_t i : prof) {
      penalty += mean * p2[i];
      mean = mean * (1.0 + p1[i]) + premium;
    }
    return mean - policy.alpha * penalty;
  };

  DpVerdict v;
  v.profiles = total;
  std::vector<std::size_t> prof(static_cast<std::size_t>(T), 0), best_prof;
  v.best_value = -kInf;
  v.best_stationary_value = -kInf;
  for (std::size_t count = 0; count < total; ++count) {
    const double a = target(prof);
    if (a > v.best_value) {
      v.best_value = a;
      best_prof = prof;
    }
    if (std::all_of(prof.begin(), prof.end(), [&](std::size_t i) { return i == prof[0]; }) &&
        a > v.best_stationary_value) {
      v.best_stationary_value = a;
      v.best_stationary_k = ks[prof[0]];
    }
    for (std::size_t d = 0; d < prof.size(); ++d) {
      if (++prof[d] < g) break;
      prof[d] = 0;
    }
  }
  for (std::size_t i : best_prof) v.best_profile.push_back(ks[i]);
  v.constant = std::all_of(best_prof.begin(), best_prof.end(),
                           [&](std::size_t i) { return i == best_prof[0]; });
  v.stationary_optimal =
      v.best_value <= v.best_stationary_value + tolerance * std::max(1.0, std::abs(v.best_value));
  return v;
}

// ---------------------------------------------------------------------------
// Monte Carlo

struct AccountStats {
  double mean_terminal = 0.0;   // E[V_T]
  double se_terminal = 0.0;
  double mean_variation = 0.0;  // E[sum_t (V_t - V_{t-1} - gamma pi)^2 / V_{t-1}]
  double penalized = 0.0;       // E[V_T] - alpha * mean_variation
  double se_penalized = 0.0;
};

struct SimulationSummary {
  int n_paths = 0;
  int T = 0;
  std::vector<AccountStats> accounts;
  double mean_terminal = 0.0;  // averages over individuals
  double penalized = 0.0;
  double mean_variation = 0.0;
  double shortfall_frequency = 0.0;  // share of periods with unmet coverage
  double claim_frequency = 0.0;      // share of periods with any claim
  double mean_external_support = 0.0;
  double mean_collective = 0.0;      // E[C_T]
};

struct PathResult {
  PoolState final_state;
  std::vector<StepReport> reports;
  std::vector<double> variation;
  int shortfall_periods = 0;
  int claim_periods = 0;
};

/// Runs one trajectory on given gross returns.
inline PathResult run_path(const PoolState& initial, const PoolConfig& cfg,
                           const std::vector<double>& gross_returns, bool keep_reports = true) {
  PathResult r;
  r.final_state = initial;
  r.variation.assign(initial.individuals.size(), 0.0);
  for (double y : gross_returns) {
    auto out = step(r.final_state, y, cfg);
    for (std::size_t j = 0; j < r.variation.size(); ++j) {
      const double prev = r.final_state.individuals[j].value;
      if (prev > 0.0) {
        const double d = out.state.individuals[j].value - prev - cfg.gamma * cfg.premium(j);
        r.variation[j] += d * d / prev;
      }
    }
    r.shortfall_periods += out.report.shortfall ? 1 : 0;
    r.claim_periods += out.report.total_claims > 0.0 ? 1 : 0;
    r.final_state = std::move(out.state);
    if (keep_reports) r.reports.push_back(std::move(out.report));
  }
  return r;
}

/// Monte Carlo statistics over `n_paths` paths of cfg.T periods. Path p uses
/// the stream derive_seed(seed, p); results do not depend on `threads`.
inline SimulationSummary simulate(const PoolConfig& cfg, const GbmParams& params,
                                  const PoolState& initial, int n_paths, std::uint64_t seed,
                                  unsigned threads = 0) {
  params.validate();
  cfg.validate(initial.individuals.size());
  if (n_paths < 1) throw std::invalid_argument("simulate: n_paths must be >= 1");
  const std::size_t n = initial.individuals.size();
  constexpr std::size_t kBlock = 256;
  const std::size_t blocks = (static_cast<std::size_t>(n_paths) + kBlock - 1) / kBlock;

  struct Sums {
    std::vector<double> v, v2, rv, a, a2;
    double shortfalls = 0.0, claims = 0.0, external = 0.0, collective = 0.0;
  };
  std::vector<Sums> partial(blocks);

  parallel_for(blocks, threads, [&](std::size_t b) {
    Sums s;
    s.v.assign(n, 0.0);
    s.v2 = s.rv = s.a = s.a2 = s.v;
    const std::size_t end = std::min<std::size_t>((b + 1) * kBlock, static_cast<std::size_t>(n_paths));
    std::vector<double> ys(static_cast<std::size_t>(cfg.T));
    for (std::size_t p = b * kBlock; p < end; ++p) {
      ReturnSampler sampler(params, derive_seed(seed, p));
      for (auto& y : ys) y = sampler.next();
      const PathResult r = run_path(initial, cfg, ys, false);
      s.shortfalls += r.shortfall_periods;
      s.claims += r.claim_periods;
      for (std::size_t j = 0; j < n; ++j) {
        const double v = r.final_state.individuals[j].value;
        const double a = v - cfg.policy.alpha * r.variation[j];
        s.v[j] += v;
        s.v2[j] += v * v;
        s.rv[j] += r.variation[j];
        s.a[j] += a;
        s.a2[j] += a * a;
      }
      s.external += r.final_state.external_support;
      s.collective += r.final_state.collective.value;
    }
    partial[b] = std::move(s);
  });

  Sums tot;
  tot.v.assign(n, 0.0);
  tot.v2 = tot.rv = tot.a = tot.a2 = tot.v;
  for (const auto& s : partial) {
    for (std::size_t j = 0; j < n; ++j) {
      tot.v[j] += s.v[j];
      tot.v2[j] += s.v2[j];
      tot.rv[j] += s.rv[j];
      tot.a[j] += s.a[j];
      tot.a2[j] += s.a2[j];
    }
    tot.shortfalls += s.shortfalls;
    tot.claims += s.claims;
    tot.external += s.external;
    tot.collective += s.collective;
  }

  const double m = static_cast<double>(n_paths);
  auto se = [&](double sum, double sum2) {
    if (n_paths < 2) return 0.0;
    const double mean = sum / m;
    const double var = std::max(0.0, (sum2 - m * mean * mean) / (m - 1.0));
    return std::sqrt(var / m);
  };
  SimulationSummary out;
  out.n_paths = n_paths;
  out.T = cfg.T;
  for (std::size_t j = 0; j < n; ++j) {
    AccountStats a;
    a.mean_terminal = tot.v[j] / m;
    a.se_terminal = se(tot.v[j], tot.v2[j]);
    a.mean_variation = tot.rv[j] / m;
    a.penalized = tot.a[j] / m;
    a.se_penalized = se(tot.a[j], tot.a2[j]);
    out.accounts.push_back(a);
    out.mean_terminal += a.mean_terminal;
    out.penalized += a.penalized;
    out.mean_variation += a.mean_variation;
  }
  if (n > 0) {
    out.mean_terminal /= static_cast<double>(n);
    out.penalized /= static_cast<double>(n);
    out.mean_variation /= static_cast<double>(n);
  }
  const double periods = m * cfg.T;
  out.shortfall_frequency = tot.shortfalls / periods;
  out.claim_frequency = tot.claims / periods;
  out.mean_external_support = tot.external / m;
  out.mean_collective = tot.collective / m;
  return out;
}

/// One row per individual and period.
inline void write_step_log(std::ostream& os, const std::vector<StepReport>& reports,
                           bool header = true) {
  if (header) os << "t,owner_id,V,eta,transfer_units,transfer_value,help_granted,z_star,theta,C\n";
  const auto old = os.precision(15);
  for (const auto& r : reports)
    for (const auto& a : r.accounts)
      os << r.t << ',' << a.owner_id << ',' << a.value << ',' << a.eta << ',' << a.transfer_units
         << ',' << a.transfer_value << ',' << (a.help_granted ? 1 : 0) << ',' << r.z_star << ','
         << r.theta << ',' << r.collective << '\n';
  os.precision(old);
}

}  // namespace pension
