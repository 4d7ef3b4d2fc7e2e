#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pension/pool.hpp"

using namespace pension;
using Catch::Approx;

namespace {

const GbmParams kExample{0.045, 0.06, 0.0};

PoolConfig config(Regime regime, double alpha = 0.0) {
  PoolConfig cfg;
  cfg.regime = regime;
  cfg.policy.alpha = alpha;
  return cfg;
}

// Three individuals worth 8, 16, 24 at price 1; a return of -50% against a
// boundary of 0.25 produces claims 1, 2, 3.
PoolState three(double collective) {
  return PoolState::make(GbmParams{0.0, 0.1, 0.0}, {8, 16, 24}, {0.25, 0.25, 0.25}, collective);
}

double units(const PoolState& s) {
  double total = s.collective.theta;
  for (const auto& a : s.individuals) total += a.eta;
  return total;
}

double value(const PoolState& s) {
  double total = s.collective.value;
  for (const auto& a : s.individuals) total += a.value;
  return total;
}

// Threshold from its definition, looping over every individual.
double z_star_quadratic(const std::vector<double>& k, const std::vector<double>& eta,
                        double theta, double hf) {
  const double c = theta / hf;
  double num = c;
  double den = c;
  for (std::size_t j = 0; j < k.size(); ++j) {
    double need = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) need += eta[i] * std::max(k[j] - k[i], 0.0);
    if (c * (1.0 - k[j]) >= need) {
      num += eta[j] * k[j];
      den += eta[j];
    }
  }
  if (!(den > 0.0)) return -1.0;
  return std::clamp(-num / den, -1.0, 0.0);
}

struct RandomPool {
  std::vector<double> k, eta;
  double theta = 0.0;
};

RandomPool random_pool(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RandomPool p;
  for (std::size_t j = 0; j < n; ++j) {
    // Some shared boundaries to exercise ties.
    p.k.push_back(unit(rng) < 0.3 ? 0.1 : unit(rng));
    p.eta.push_back(unit(rng) < 0.1 ? 0.0 : 10.0 * unit(rng));
  }
  p.theta = unit(rng) < 0.1 ? 0.0 : 20.0 * unit(rng) * unit(rng);
  return p;
}

}  // namespace

// ---------------------------------------------------------------------------
// One period

TEST_CASE("returns inside the corridor only compound", "[pool][step]") {
  const auto s = PoolState::make(kExample, {10, 20}, {0.2, 0.2}, 5.0);
  for (Regime r : {Regime::AlwaysHelp, Regime::NoHelpIfInsufficient, Regime::IndexCappedHelp}) {
    const auto out = step(s, 1.1, config(r));
    CHECK(out.state.individuals[0].value == Approx(11.0).epsilon(1e-15));
    CHECK(out.state.individuals[1].value == Approx(22.0).epsilon(1e-15));
    CHECK(out.state.collective.value == Approx(5.5).epsilon(1e-15));
    CHECK(out.state.individuals[0].eta == s.individuals[0].eta);
    CHECK(out.report.total_claims == 0.0);
    CHECK(out.report.total_give == 0.0);
    CHECK(out.report.accounts[0].transfer_units == 0.0);
    CHECK_FALSE(out.report.shortfall);
  }
}

TEST_CASE("single individual: help and give move value between accounts", "[pool][step]") {
  const auto s = PoolState::make(GbmParams{0.0, 0.1, 0.0}, {10}, {0.1}, 50.0);
  const auto down = step(s, 0.7, config(Regime::AlwaysHelp));
  // Claim 0.5 * 10 * (0.3 - 0.1) = 1.
  CHECK(down.report.total_claims == Approx(1.0).epsilon(1e-14));
  CHECK(down.state.individuals[0].value == Approx(8.0).epsilon(1e-14));
  CHECK(down.state.collective.value == Approx(34.0).epsilon(1e-14));
  CHECK(down.report.accounts[0].help_granted);
  CHECK(down.report.accounts[0].transfer_units == Approx(1.0 / 0.7).epsilon(1e-14));

  const auto up = step(s, 1.5, config(Regime::AlwaysHelp));
  // Give 0.25 * 10 * (0.5 - 0.1) = 1.
  CHECK(up.report.total_give == Approx(1.0).epsilon(1e-14));
  CHECK(up.state.individuals[0].value == Approx(14.0).epsilon(1e-14));
  CHECK(up.state.collective.value == Approx(76.0).epsilon(1e-14));
  for (const auto* o : {&down, &up}) CHECK(value(o->state) == Approx(value(s) * o->report.gross_return).epsilon(1e-14));
}

TEST_CASE("no help unless the collective strictly exceeds the claims", "[pool][step][regime]") {
  const auto cfg = config(Regime::NoHelpIfInsufficient);
  // Cover theta * H = 12 * 0.5 = 6 equals the claims 1 + 2 + 3.
  const auto tie = step(three(12.0), 0.5, cfg);
  CHECK(tie.report.total_claims == 6.0);
  CHECK_FALSE(tie.report.indicator);
  CHECK(tie.report.shortfall);
  CHECK(tie.report.total_help == 0.0);
  CHECK(tie.state.collective.value == 6.0);
  CHECK(tie.state.individuals[2].value == 12.0);

  const auto more = step(three(12.5), 0.5, cfg);
  CHECK(more.report.indicator);
  CHECK(more.report.total_help == 6.0);
  CHECK(more.state.individuals[0].value == 5.0);
  CHECK(more.state.individuals[1].value == 10.0);
  CHECK(more.state.individuals[2].value == 15.0);
  CHECK(more.state.collective.value == Approx(0.25).epsilon(1e-15));
}

TEST_CASE("index-capped help: index shares first, settlement of the rest", "[pool][step][regime]") {
  auto cfg = config(Regime::IndexCappedHelp);
  cfg.index_weights = {0.5, 0.25, 0.25};
  // Cover 4: shares (2, 1, 1) against claims (1, 2, 3) pay (1, 1, 1); the
  // remaining 1 is split evenly between the last two claimants.
  const auto out = step(three(8.0), 0.5, cfg);
  CHECK(out.report.accounts[0].transfer_value == 1.0);
  CHECK(out.report.accounts[1].transfer_value == 1.5);
  CHECK(out.report.accounts[2].transfer_value == 1.5);
  CHECK(out.state.collective.value == 0.0);
  CHECK(out.report.external_support == 0.0);

  // Proportional weights that cover every claim in the first stage.
  cfg.index_weights = {1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0};
  const auto exact = step(three(12.0), 0.5, cfg);
  CHECK(exact.report.total_help == Approx(6.0).epsilon(1e-15));
}

TEST_CASE("index-capped help with tracked shares", "[pool][step][regime]") {
  // Without fixed weights the shares start proportional to the initial values.
  const auto s = three(8.0);
  CHECK(s.index_shares == std::vector<double>{8.0 / 48.0, 16.0 / 48.0, 24.0 / 48.0});
  const auto out = step(s, 0.5, config(Regime::IndexCappedHelp));
  // Shares times cover 4 are (2/3, 4/3, 2), below every claim, and nothing is left.
  CHECK(out.report.accounts[0].transfer_value == Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(out.report.accounts[1].transfer_value == Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(out.report.accounts[2].transfer_value == Approx(2.0).epsilon(1e-14));

  // Contributions move the tracked shares.
  auto cfg = config(Regime::IndexCappedHelp);
  cfg.gamma = 0.5;
  cfg.premiums = {0.0, 0.0, 2.0};
  const auto next = step(s, 1.0, cfg);
  // Collective worth 8 receives 1 from the third individual.
  CHECK(next.state.index_shares[2] == Approx((0.5 * 8.0 + 1.0) / 9.0).epsilon(1e-14));
  CHECK(next.state.index_shares[0] == Approx((8.0 / 48.0 * 8.0) / 9.0).epsilon(1e-14));
}

TEST_CASE("always help can run the collective into deficit", "[pool][step][regime]") {
  auto cfg = config(Regime::AlwaysHelp);
  cfg.gamma = 1.0;
  cfg.premiums = {1.0};
  const auto s = PoolState::make(GbmParams{0.0, 0.1, 0.0}, {10}, {0.1}, 0.0);
  const auto out = step(s, 0.5, cfg);
  // Claim 0.5 * 10 * 0.4 = 2 is paid although the collective is empty.
  CHECK(out.report.total_help == Approx(2.0).epsilon(1e-14));
  CHECK(out.state.collective.value == Approx(-2.0).epsilon(1e-14));
  CHECK(out.state.collective.theta < 0.0);
  CHECK(out.report.external_support == Approx(2.0).epsilon(1e-14));
  CHECK(out.state.individuals[0].value == Approx(5.0 + 1.0 + 2.0).epsilon(1e-14));

  // Along a falling market every period adds external support.
  PathResult r = run_path(s, cfg, std::vector<double>(5, 0.6));
  for (const auto& rep : r.reports) {
    CHECK(rep.external_support == Approx(rep.total_help).epsilon(1e-14));
    CHECK(rep.collective < 0.0);
  }
  CHECK(r.final_state.external_support > 2.0);
}

TEST_CASE("regimes are ordered by the help they pay", "[pool][step][regime]") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int draw = 0; draw < 500; ++draw) {
    const std::size_t n = 1 + draw % 7;
    std::vector<double> values, k;
    for (std::size_t j = 0; j < n; ++j) {
      values.push_back(1.0 + 50.0 * unit(rng));
      k.push_back(0.3 * unit(rng));
    }
    const auto s = PoolState::make(GbmParams{0.0, 0.1, 0.0}, values, k, 10.0 * unit(rng));
    const double y = 0.4 + unit(rng);
    const double all = step(s, y, config(Regime::AlwaysHelp)).report.total_help;
    const double capped = step(s, y, config(Regime::IndexCappedHelp)).report.total_help;
    const double none = step(s, y, config(Regime::NoHelpIfInsufficient)).report.total_help;
    CHECK(all >= capped - 1e-12);
    CHECK(capped >= none - 1e-12);
  }
}

TEST_CASE("fund units are conserved and the collective stays non-negative", "[pool][step][property]") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int draw = 0; draw < 2000; ++draw) {
    const std::size_t n = 1 + draw % 9;
    std::vector<double> values, k;
    for (std::size_t j = 0; j < n; ++j) {
      values.push_back(100.0 * unit(rng));
      k.push_back(unit(rng));
    }
    const auto s =
        PoolState::make(GbmParams{0.0, 0.2, 0.5 * unit(rng)}, values, k, 30.0 * unit(rng));
    const Regime regime = static_cast<Regime>(draw % 3);
    auto cfg = config(regime);
    cfg.policy.p = 1.0 + unit(rng);
    const double y = 0.05 + 1.9 * unit(rng);
    const auto out = step(s, y, cfg);
    INFO("draw " << draw);
    CHECK(std::abs(units(out.state) - units(s)) <= 1e-9 * std::max(1.0, units(s)));
    double transfers = 0.0;
    for (const auto& a : out.report.accounts) transfers += a.transfer_units;
    const double dtheta = out.state.collective.theta - s.collective.theta;
    CHECK(std::abs(transfers + dtheta) <= 1e-9 * std::max(1.0, units(s)));
    // The same in currency at the new price.
    CHECK(std::abs(value(out.state) - value(s) * y) <= 1e-9 * std::max(1.0, value(s) * y));
    if (regime != Regime::AlwaysHelp) {
      CHECK(out.state.collective.theta >= 0.0);
      CHECK(out.report.external_support == 0.0);
    }
    for (const auto& a : out.state.individuals) CHECK(a.value >= 0.0);
  }
}

TEST_CASE("premiums enter both accounts", "[pool][step]") {
  auto cfg = config(Regime::AlwaysHelp);
  cfg.gamma = 0.8;
  cfg.premiums = {1.0, 3.0};
  const auto s = PoolState::make(kExample, {10, 20}, {0.5, 0.5}, 5.0);
  const auto out = step(s, 1.0, cfg);
  CHECK(out.state.individuals[0].value == Approx(10.8).epsilon(1e-15));
  CHECK(out.state.individuals[1].value == Approx(22.4).epsilon(1e-15));
  CHECK(out.state.collective.value == Approx(5.8).epsilon(1e-15));
  cfg.pi_all = 10.0;
  CHECK(step(s, 1.0, cfg).state.collective.value == Approx(7.0).epsilon(1e-15));
}

TEST_CASE("step input validation", "[pool][step]") {
  const auto s = three(1.0);
  CHECK_THROWS_AS(step(s, 0.0, config(Regime::AlwaysHelp)), std::domain_error);
  auto cfg = config(Regime::AlwaysHelp);
  cfg.premiums = {1.0};
  CHECK_THROWS_AS(step(s, 1.0, cfg), std::invalid_argument);
  cfg = config(Regime::IndexCappedHelp);
  cfg.index_weights = {0.5, 0.5, 0.5};
  CHECK_THROWS_AS(step(s, 1.0, cfg), std::invalid_argument);
  cfg = config(Regime::AlwaysHelp);
  cfg.gamma = 2.0;
  CHECK_THROWS_AS(step(s, 1.0, cfg), std::invalid_argument);
  CHECK_THROWS_AS(PoolState::make(kExample, {1, 2}, {0.1}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(PoolState::make(kExample, {1}, {1.1}, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(PoolState::make(kExample, {1}, {0.1}, -1.0), std::invalid_argument);
  CHECK(parse_regime("IndexCappedHelp") == Regime::IndexCappedHelp);
  CHECK_FALSE(parse_regime("Sometimes"));
  CHECK(to_string(Regime::NoHelpIfInsufficient) == "NoHelpIfInsufficient");
}

// ---------------------------------------------------------------------------
// Coverage threshold

TEST_CASE("z* with a common boundary", "[pool][zstar]") {
  for (double k : {0.0, 0.1, 0.5, 1.0}) {
    const std::vector<double> ks(4, k);
    const std::vector<double> eta{1, 2, 3, 4};
    CHECK(z_star(ks, eta, 3.0) == Approx(z_common(k, 10.0, 3.0)).margin(1e-15));
  }
  CHECK(z_common(1.0, 10.0, 3.0) == -1.0);
  CHECK(z_star({1.0, 1.0}, {2.0, 5.0}, 0.0) == -1.0);
  CHECK(z_star({}, {}, 1.0) == -1.0);
  // No collective: the first claim is already uncovered.
  CHECK(z_common(0.2, 10.0, 0.0) == Approx(-0.2));
  CHECK(z_star({0.2, 0.5}, {1.0, 1.0}, 0.0) == Approx(-0.2));
  CHECK_THROWS_AS(z_star({0.2}, {1.0, 1.0}, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(z_star({0.2}, {1.0}, -1.0), std::invalid_argument);
}

TEST_CASE("z* against bisection and the quadratic definition", "[pool][zstar][property]") {
  std::mt19937_64 rng(31);
  for (int draw = 0; draw < 2000; ++draw) {
    const auto p = random_pool(rng, 1 + draw % 12);
    const double z = z_star(p.k, p.eta, p.theta);
    INFO("draw " << draw);
    CHECK(std::abs(z - oracle::z_star_bisection(p.k, p.eta, p.theta)) <= 1e-12);
    CHECK(std::abs(z - z_star_quadratic(p.k, p.eta, p.theta, 0.5)) <= 1e-12);
  }
}

TEST_CASE("coverage indicator collapses to rho >= z*", "[pool][zstar][property]") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> rho(-1.0, 0.0), hf(0.1, 1.0);
  int checked = 0;
  for (int draw = 0; draw < 10000; ++draw) {
    const auto p = random_pool(rng, 1 + draw % 10);
    const double h = hf(rng);
    const double z = z_star(p.k, p.eta, p.theta, h);
    const double r = rho(rng);
    if (std::abs(r - z) < 1e-9) continue;
    ++checked;
    CHECK(coverage_indicator(p.k, p.eta, p.theta, r, h) == (r >= z));
  }
  CHECK(checked > 9900);
}

TEST_CASE("z* falls as the collective grows", "[pool][zstar][property]") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int draw = 0; draw < 500; ++draw) {
    const auto p = random_pool(rng, 6);
    const double more = p.theta + 5.0 * unit(rng);
    CHECK(z_star(p.k, p.eta, more) <= z_star(p.k, p.eta, p.theta) + 1e-15);
  }
}

TEST_CASE("z* moves by at most eta^j / c per unit change of k^j", "[pool][zstar][property]") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int draw = 0; draw < 1000; ++draw) {
    auto p = random_pool(rng, 8);
    if (p.theta <= 0.0) continue;
    const std::size_t j = draw % 8;
    const double before = z_star(p.k, p.eta, p.theta);
    const double old_k = p.k[j];
    p.k[j] = unit(rng);
    const double after = z_star(p.k, p.eta, p.theta);
    CHECK(std::abs(after - before) <= p.eta[j] / (2.0 * p.theta) * std::abs(p.k[j] - old_k) + 1e-12);
  }
}

TEST_CASE("z* handles large pools", "[pool][zstar]") {
  std::mt19937_64 rng(1);
  const auto p = random_pool(rng, 5000);
  CHECK(std::abs(z_star(p.k, p.eta, p.theta) - oracle::z_star_bisection(p.k, p.eta, p.theta)) <= 1e-12);
}

// ---------------------------------------------------------------------------
// Paths and Monte Carlo

TEST_CASE("deterministic returns compound", "[pool][path]") {
  const auto s = PoolState::make(kExample, {10, 20}, {1.0, 1.0}, 3.0);
  const auto r = run_path(s, config(Regime::NoHelpIfInsufficient), std::vector<double>(20, std::exp(0.045)));
  CHECK(r.reports.size() == 20);
  CHECK(r.final_state.t == 20);
  CHECK(r.final_state.individuals[0].value == Approx(10.0 * std::exp(0.9)).epsilon(1e-13));
  CHECK(r.final_state.collective.value == Approx(3.0 * std::exp(0.9)).epsilon(1e-13));
  CHECK(r.final_state.price == Approx(std::exp(0.9)).epsilon(1e-13));
  CHECK(r.claim_periods == 0);
}

TEST_CASE("one period Monte Carlo against Psi1 and Psi2", "[pool][simulate][mc]") {
  auto cfg = config(Regime::AlwaysHelp, 4.0);
  cfg.T = 1;
  const double k = 0.1215;
  const auto s = PoolState::make(kExample, {1.0}, {k}, 0.0);
  const auto sum = simulate(cfg, kExample, s, 200'000, 5, 0);
  const auto at = cfg.policy.with_k(k);
  const double mean = 1.0 + psi1(kExample, at);
  CHECK(std::abs(sum.accounts[0].mean_terminal - mean) < 4.0 * sum.accounts[0].se_terminal);
  const double target = mean - 4.0 * psi2(kExample, at);
  CHECK(std::abs(sum.accounts[0].penalized - target) < 4.0 * sum.accounts[0].se_penalized);
  CHECK(sum.mean_external_support > 0.0);
}

TEST_CASE("simulation does not depend on the thread count", "[pool][simulate]") {
  auto cfg = config(Regime::IndexCappedHelp, 4.0);
  cfg.T = 10;
  cfg.gamma = 0.8;
  cfg.premiums = {1, 1, 1};
  const auto s = PoolState::make(kExample, {10, 20, 30}, {0.1, 0.1, 0.1}, 5.0);
  const auto a = simulate(cfg, kExample, s, 1000, 42, 1);
  for (unsigned threads : {2u, 3u, 8u}) {
    const auto b = simulate(cfg, kExample, s, 1000, 42, threads);
    CHECK(a.mean_terminal == b.mean_terminal);
    CHECK(a.penalized == b.penalized);
    CHECK(a.shortfall_frequency == b.shortfall_frequency);
    CHECK(a.mean_collective == b.mean_collective);
    for (std::size_t j = 0; j < 3; ++j) CHECK(a.accounts[j].se_terminal == b.accounts[j].se_terminal);
  }
  CHECK(simulate(cfg, kExample, s, 1000, 43, 1).mean_terminal != a.mean_terminal);
  CHECK_THROWS_AS(simulate(cfg, kExample, s, 0, 42, 1), std::invalid_argument);
}

TEST_CASE("step log layout", "[pool][path]") {
  const auto s = PoolState::make(kExample, {10, 20}, {0.1, 0.1}, 3.0);
  const auto r = run_path(s, config(Regime::AlwaysHelp), {0.8, 1.3});
  std::ostringstream os;
  write_step_log(os, r.reports);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "t,owner_id,V,eta,transfer_units,transfer_value,help_granted,z_star,theta,C");
  int rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == 4);
}

// ---------------------------------------------------------------------------
// Common barrier

TEST_CASE("fixed point with an ample collective is the mean-variance optimum", "[pool][fixed_point]") {
  CorridorPolicy pol;
  pol.alpha = 4.0;
  const auto r = fixed_point_barriers(kExample, pol, 100.0, 1e9);
  CHECK(r.converged);
  CHECK_FALSE(r.cycle);
  CHECK(r.c == Approx(-1.0).margin(1e-6));
  CHECK(std::abs(r.k - maximize_m2(kExample, pol, 0.0).k) < 1e-6);
}

TEST_CASE("fixed point results are fixed points or flagged cycles", "[pool][fixed_point]") {
  std::mt19937_64 rng(2718);
  std::uniform_real_distribution<double> mu(-0.02, 0.08), sigma(0.03, 0.25), alpha(0.0, 6.0),
      theta(0.0, 40.0);
  for (int draw = 0; draw < 10; ++draw) {
    const GbmParams g{mu(rng), sigma(rng), 0.0};
    CorridorPolicy pol;
    pol.alpha = alpha(rng);
    const double th = draw == 0 ? 0.0 : theta(rng);
    const auto r = fixed_point_barriers(g, pol, 10.0, th);
    INFO("draw " << draw << " mu " << g.mu << " sigma " << g.sigma << " alpha " << pol.alpha);
    const auto k_min = *admissible_min_k(g, pol);
    const double back = k_of_c(g, pol, z_common(r.k, 10.0, th), k_min).k;
    if (r.converged) {
      CHECK(std::abs(back - r.k) < 1e-6);
    } else {
      CHECK(r.cycle);
      // The other member of the cycle maps back onto the chosen barrier.
      CHECK(std::abs(k_of_c(g, pol, z_common(back, 10.0, th), k_min).k - r.k) < 1e-6);
    }
    // k(c) is optimal along the curve c = z(k).
    for (int i = 0; i <= 50; ++i) {
      const double k = k_min + (1.0 - k_min) * i / 50.0;
      const double c = z_common(k, 10.0, th);
      CHECK(n_func(g, pol, c, k) <= k_of_c(g, pol, c, k_min).value + 1e-12);
    }
  }
  CorridorPolicy pol;
  CHECK_THROWS_AS(fixed_point_barriers(kExample, pol, 10.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(fixed_point_barriers(kExample, pol, -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("improvement bound", "[pool][bound]") {
  CorridorPolicy pol;
  pol.alpha = 2.0;
  const std::vector<double> eta{1.0, 3.0};
  const double expected = density_sup(kExample) * 2.5 * 3.0 / (2.0 * 5.0 + 4.0);
  CHECK(improvement_bound(1, eta, 5.0, pol, kExample) == Approx(expected).epsilon(1e-15));
  CHECK_THROWS_AS(improvement_bound(2, eta, 5.0, pol, kExample), std::out_of_range);
  CHECK(improvement_bound(0, {0.0}, 0.0, pol, kExample) == 0.0);
  // Larger holdings can gain more; a larger collective shrinks the bound.
  CHECK(improvement_bound(1, eta, 5.0, pol, kExample) > improvement_bound(0, eta, 5.0, pol, kExample));
  CHECK(improvement_bound(1, eta, 50.0, pol, kExample) < improvement_bound(1, eta, 5.0, pol, kExample));
}

TEST_CASE("single deviations gain no more than the bound in a large pool", "[pool][bound]") {
  std::mt19937_64 rng(1000);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = 1000;
  std::vector<double> eta(n);
  double total = 0.0;
  for (auto& e : eta) total += (e = 0.5 + unit(rng));
  const double theta = 0.05 * total;
  CorridorPolicy pol;
  pol.alpha = 4.0;
  const auto fp = fixed_point_barriers(kExample, pol, total, theta);
  REQUIRE(fp.converged);
  const auto k_min = *admissible_min_k(kExample, pol);
  for (std::size_t j : {std::size_t{0}, std::size_t{17}, std::size_t{999}}) {
    const auto br = best_response(kExample, pol, eta, theta, j, fp.k, k_min);
    CHECK(br.improvement <= improvement_bound(j, eta, theta, pol, kExample));
  }
}

TEST_CASE("exhaustive search confirms stationary boundaries", "[pool][dp]") {
  CorridorPolicy pol;
  pol.alpha = 4.0;
  for (int T : {2, 3}) {
    const auto v = dp_check(kExample, pol, T, 21);
    CHECK(v.profiles == static_cast<std::size_t>(std::pow(21, T)));
    CHECK(v.stationary_optimal);
    CHECK(v.constant);
    CHECK(v.best_profile.size() == static_cast<std::size_t>(T));
  }
  // T = 1 is the single-period problem on the grid.
  const auto one = dp_check(kExample, pol, 1, 21);
  const auto [x, best] = oracle::grid_argmax([&](double k) { return m2(kExample, pol, k); }, 0.0, 1.0, 21);
  CHECK(one.best_stationary_k == Approx(x).margin(1e-12));
  CHECK(one.best_value == Approx(1.0 + best).epsilon(1e-14));
  CHECK_THROWS_AS(dp_check(kExample, pol, 5), std::invalid_argument);
}
