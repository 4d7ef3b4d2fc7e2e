#pragma once

// Corridor functionals of one period. With rho = Y - 1 and corridor
// [-k, k*p], an individual gives away give_frac * (rho - k*p)^+ of its
// value and is helped with help_frac * (-k - rho)^+. Every functional is an
// expectation of a piecewise-affine function of Y and is evaluated in
// closed form through lognormal partial moments.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

#include "pension/market_model.hpp"
#include "pension/optimize.hpp"
#include "pension/piecewise.hpp"

namespace pension {

struct CorridorPolicy {
  double k = 0.0;           // lower boundary magnitude
  double p = 1.0;           // upper boundary is k * p
  double give_frac = 0.25;  // share of the surplus handed to the collective
  double help_frac = 0.5;   // share of the shortfall compensated
  double alpha = 0.0;       // variance penalty
  double J = 0.0;           // redistribution index of the individual

  void validate() const {
    if (!(k >= 0.0 && k <= 1.0)) throw std::invalid_argument("CorridorPolicy: k outside [0,1]");
    if (!(p >= 1.0)) throw std::invalid_argument("CorridorPolicy: p must be >= 1");
    if (!(give_frac >= 0.0 && give_frac <= 1.0))
      throw std::invalid_argument("CorridorPolicy: give_frac outside [0,1]");
    if (!(help_frac >= 0.0 && help_frac <= 1.0))
      throw std::invalid_argument("CorridorPolicy: help_frac outside [0,1]");
    if (!(alpha >= 0.0)) throw std::invalid_argument("CorridorPolicy: alpha must be >= 0");
    if (!(J >= 0.0 && J < 1.0)) throw std::invalid_argument("CorridorPolicy: J outside [0,1)");
  }

  CorridorPolicy with_k(double new_k) const {
    CorridorPolicy out = *this;
    out.k = new_k;
    return out;
  }

  double upper() const { return k * p; }
};

struct XiParams {
  double a = 2.0;  // help divisor
  double b = 4.0;  // give divisor

  void validate() const {
    if (!(1.0 < a && a < b)) throw std::invalid_argument("XiParams: need 1 < a < b");
  }
};

// ---------------------------------------------------------------------------
// Payoffs

/// Transfer into the individual account per unit of V_{t-1}. Help is only
/// granted when rho > c; c = -1 means always.
inline PiecewiseAffine transfer_payoff(const CorridorPolicy& policy, double c = -1.0) {
  const double lower = 1.0 - policy.k;
  const double upper = 1.0 + policy.upper();
  const double gate = 1.0 + c;
  const double gf = policy.give_frac;
  const double hf = policy.help_frac;
  return PiecewiseAffine::from_breakpoints({lower, upper, gate}, [&](double y) {
    double a = 0.0;
    double b = 0.0;
    if (y > upper) {
      a += gf * upper;
      b -= gf;
    }
    if (y < lower && y > gate) {
      a += hf * lower;
      b -= hf;
    }
    return std::pair{a, b};
  });
}

/// rho plus transfers: (V_t - V_{t-1} - premium) / V_{t-1}.
inline PiecewiseAffine smoothed_return_payoff(const CorridorPolicy& policy, double c = -1.0) {
  auto pieces = transfer_payoff(policy, c).pieces();
  for (auto& piece : pieces) {
    piece.intercept -= 1.0;
    piece.slope += 1.0;
  }
  return PiecewiseAffine(std::move(pieces));
}

/// h(c, k) evaluated at a realised net return.
inline double h_payoff(double rho, double c, double k, const CorridorPolicy& policy) {
  double h = rho - policy.give_frac * std::max(rho - k * policy.p, 0.0);
  if (rho > c) h += policy.help_frac * std::max(-k - rho, 0.0);
  return h;
}

// ---------------------------------------------------------------------------
// Functionals

/// Expected net transfer out of the collective account per unit of V_{t-1}.
/// The policy is admissible iff this is <= 0.
inline double profitability_lhs(const GbmParams& params, const CorridorPolicy& policy) {
  return transfer_payoff(policy).mean(params);
}

inline bool is_admissible(const GbmParams& params, const CorridorPolicy& policy) {
  return profitability_lhs(params, policy) <= 0.0;
}

/// M_1 (M_p for p > 1): (1 - J) * E[help - give].
inline double m1(const GbmParams& params, const CorridorPolicy& policy) {
  return (1.0 - policy.J) * profitability_lhs(params, policy);
}

/// d M_p / dk in closed form.
inline double m1_derivative(const GbmParams& params, const CorridorPolicy& policy) {
  const double k = policy.k;
  return (1.0 - policy.J) * (-policy.help_frac * probability(params, 0.0, 1.0 - k) +
                             policy.give_frac * policy.p *
                                 probability(params, 1.0 + policy.upper(), kInf));
}

inline double psi1(const GbmParams& params, const CorridorPolicy& policy) {
  return smoothed_return_payoff(policy).mean(params);
}

inline double psi2(const GbmParams& params, const CorridorPolicy& policy) {
  return smoothed_return_payoff(policy).second_moment(params);
}

/// N(c, k) = E[rho] + (1 - J) E[transfer_c] - alpha E[h(c, k)^2]. For J = 0
/// this is E[h - alpha h^2]; c = -1 gives M_2.
inline double n_func(const GbmParams& params, const CorridorPolicy& policy, double c, double k) {
  const CorridorPolicy at = policy.with_k(k);
  const auto transfer = transfer_payoff(at, c);
  auto h = transfer.pieces();
  for (auto& piece : h) {
    piece.intercept -= 1.0;
    piece.slope += 1.0;
  }
  return params.mean_net_return() + (1.0 - policy.J) * transfer.mean(params) -
         policy.alpha * PiecewiseAffine(std::move(h)).second_moment(params);
}

/// M_2(k): mean-variance criterion. Reduces to Psi1 - alpha Psi2 for J = 0.
inline double m2(const GbmParams& params, const CorridorPolicy& policy, double k) {
  return n_func(params, policy, -1.0, k);
}

inline double xi(const GbmParams& params, const XiParams& xp, double k) {
  xp.validate();
  const double a = xp.a;
  const double b = xp.b;
  const auto payoff = PiecewiseAffine::from_breakpoints({1.0 - k, 1.0 + k}, [&](double y) {
    double ia = -1.0;
    double sl = 1.0;
    if (y < 1.0 - k) {
      ia += (1.0 - k) / a;
      sl -= 1.0 / a;
    }
    if (y > 1.0 + k) {
      ia += (1.0 + k) / b;
      sl -= 1.0 / b;
    }
    return std::pair{ia, sl};
  });
  return payoff.mean(params);
}

inline double xi_d1(const GbmParams& params, const XiParams& xp, double k) {
  xp.validate();
  return -probability(params, 0.0, 1.0 - k) / xp.a + probability(params, 1.0 + k, kInf) / xp.b;
}

inline double xi_d2(const GbmParams& params, const XiParams& xp, double k) {
  xp.validate();
  const double lower = 1.0 - k;
  const double f_lower = lower > 0.0 ? density(params, lower) : 0.0;
  return f_lower / xp.a - density(params, 1.0 + k) / xp.b;
}

// ---------------------------------------------------------------------------
// Admissibility

/// Smallest k in [0,1] with profitability_lhs <= 0, or nullopt. A scan
/// locates the first admissible grid cell, bisection refines it to `tol`.
inline std::optional<double> admissible_min_k(const GbmParams& params,
                                              const CorridorPolicy& policy, double tol = 1e-10,
                                              int scan_points = 1001) {
  if (!(tol > 0.0)) throw std::invalid_argument("admissible_min_k: tol must be positive");
  auto ok = [&](double k) { return is_admissible(params, policy.with_k(k)); };
  if (ok(0.0)) return 0.0;
  double prev = 0.0;
  for (int i = 1; i < scan_points; ++i) {
    const double k = i == scan_points - 1 ? 1.0 : static_cast<double>(i) / (scan_points - 1);
    if (ok(k)) {
      double lo = prev;
      double hi = k;
      while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? hi : lo) = mid;
      }
      return hi;
    }
    prev = k;
  }
  return std::nullopt;
}

/// Maximal sub-intervals of [0,1] on which the policy is admissible, as seen
/// on a grid of `points` nodes.
inline std::vector<std::pair<double, double>> admissible_intervals(const GbmParams& params,
                                                                   const CorridorPolicy& policy,
                                                                   int points = 2001) {
  std::vector<std::pair<double, double>> out;
  std::optional<double> start;
  double last = 0.0;
  for (int i = 0; i < points; ++i) {
    const double k = i == points - 1 ? 1.0 : static_cast<double>(i) / (points - 1);
    if (is_admissible(params, policy.with_k(k))) {
      if (!start) start = k;
      last = k;
    } else if (start) {
      out.emplace_back(*start, last);
      start.reset();
    }
  }
  if (start) out.emplace_back(*start, last);
  return out;
}

// ---------------------------------------------------------------------------
// Boundary search

struct StationaryPoint {
  double k = 0.0;
  double value = 0.0;
  bool is_max = false;
};

/// Interior stationary points of M_p on (0,1), ignoring admissibility.
inline std::vector<StationaryPoint> m1_stationary_points(const GbmParams& params,
                                                         const CorridorPolicy& policy,
                                                         int points = 10001) {
  auto d = [&](double k) { return m1_derivative(params, policy.with_k(k)); };
  std::vector<StationaryPoint> out;
  double k_prev = 0.0;
  double d_prev = d(0.0);
  for (int i = 1; i < points; ++i) {
    const double k = static_cast<double>(i) / (points - 1);
    const double dk = d(k);
    if ((d_prev > 0.0 && dk < 0.0) || (d_prev < 0.0 && dk > 0.0)) {
      double lo = k_prev;
      double hi = k;
      const bool rising = d_prev > 0.0;
      for (int it = 0; it < 200 && hi - lo > 1e-14; ++it) {
        const double mid = 0.5 * (lo + hi);
        ((d(mid) > 0.0) == rising ? lo : hi) = mid;
      }
      const double ks = 0.5 * (lo + hi);
      out.push_back({ks, m1(params, policy.with_k(ks)), rising});
    }
    if (dk != 0.0) {
      k_prev = k;
      d_prev = dk;
    }
  }
  return out;
}

struct M1Result {
  double k = 0.0;
  double value_at_min = 0.0;  // M_1(k_min)
  double value_at_one = 0.0;  // M_1(1)
  double k_min = 0.0;
};

/// Bang-bang maximiser of M_1 over the admissible boundaries: the larger of
/// M_1(k_min) and M_1(1).
inline M1Result maximize_m1(const GbmParams& params, const CorridorPolicy& policy, double k_min) {
  if (!(k_min >= 0.0 && k_min <= 1.0) || !is_admissible(params, policy.with_k(k_min)))
    throw std::domain_error("maximize_m1: no admissible k");
  M1Result r;
  r.k_min = k_min;
  r.value_at_min = m1(params, policy.with_k(k_min));
  r.value_at_one = m1(params, policy.with_k(1.0));
  r.k = r.value_at_one > r.value_at_min ? 1.0 : k_min;
  return r;
}

inline M1Result maximize_m1(const GbmParams& params, const CorridorPolicy& policy) {
  const auto k_min = admissible_min_k(params, policy);
  if (!k_min) throw std::domain_error("maximize_m1: no admissible k");
  return maximize_m1(params, policy, *k_min);
}

struct BoundaryChoice {
  double k = 0.0;
  double value = 0.0;
  bool tie = false;
  std::vector<Mode> tied;      // near-equal maxima (tie only)
  double m1_slope_low = 0.0;   // M_1' at the smallest tied maximiser
  double m1_slope_high = 0.0;  // M_1' at the largest tied maximiser
  std::vector<Mode> modes;
};

/// Central difference of M_1 with step h, one-sided at the ends of [0,1].
inline double m1_slope(const GbmParams& params, const CorridorPolicy& policy, double k,
                       double h = 1e-5) {
  const double lo = std::max(0.0, k - h);
  const double hi = std::min(1.0, k + h);
  return (m1(params, policy.with_k(hi)) - m1(params, policy.with_k(lo))) / (hi - lo);
}

namespace detail {

// Among tied maximisers k1 < k2 pick k1 if M_1 decreases and k2 if it
// increases. When the slopes at k1 and k2 disagree, M_1 has its turning
// point in between and the maximiser with the larger M_1 is taken.
inline BoundaryChoice resolve(const GbmParams& params, const CorridorPolicy& policy,
                              const GridMaximum& gm) {
  BoundaryChoice out;
  out.modes = gm.modes;
  out.k = gm.best.x;
  out.value = gm.best.value;
  out.tie = gm.tie;
  if (!gm.tie) return out;
  out.tied = gm.tied;
  const Mode& low = gm.tied.front();
  const Mode& high = gm.tied.back();
  out.m1_slope_low = m1_slope(params, policy, low.x);
  out.m1_slope_high = m1_slope(params, policy, high.x);
  bool pick_high;
  if (out.m1_slope_low >= 0.0 && out.m1_slope_high >= 0.0) {
    pick_high = true;
  } else if (out.m1_slope_low <= 0.0 && out.m1_slope_high <= 0.0) {
    pick_high = false;
  } else {
    pick_high = m1(params, policy.with_k(high.x)) > m1(params, policy.with_k(low.x));
  }
  const Mode& chosen = pick_high ? high : low;
  out.k = chosen.x;
  out.value = chosen.value;
  return out;
}

}  // namespace detail

/// Maximiser of M_2 over admissible k in [k_min, 1].
inline BoundaryChoice maximize_m2(const GbmParams& params, const CorridorPolicy& policy,
                                  double k_min, const GridOptions& opt = {}) {
  if (opt.points < 100) throw std::invalid_argument("maximize_m2: grid must have >= 100 points");
  if (!(opt.tol > 0.0)) throw std::invalid_argument("maximize_m2: tol must be positive");
  if (!(k_min >= 0.0 && k_min <= 1.0)) throw std::domain_error("maximize_m2: no admissible k");
  auto f = [&](double k) { return m2(params, policy, k); };
  auto feasible = [&](double k) { return is_admissible(params, policy.with_k(k)); };
  return detail::resolve(params, policy, maximize_on_grid(f, k_min, 1.0, opt, feasible));
}

/// k(c): maximiser of N(c, .) over admissible k in [k_min, 1].
inline BoundaryChoice k_of_c(const GbmParams& params, const CorridorPolicy& policy, double c,
                             double k_min, const GridOptions& opt = {}) {
  if (!(c >= -1.0 && c <= 0.0)) throw std::invalid_argument("k_of_c: c outside [-1,0]");
  if (!(k_min >= 0.0 && k_min <= 1.0)) throw std::domain_error("k_of_c: no admissible k");
  auto f = [&](double k) { return n_func(params, policy, c, k); };
  auto feasible = [&](double k) { return is_admissible(params, policy.with_k(k)); };
  return detail::resolve(params, policy, maximize_on_grid(f, k_min, 1.0, opt, feasible));
}

}  // namespace pension
