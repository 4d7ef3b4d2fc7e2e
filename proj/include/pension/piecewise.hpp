#pragma once

// Payoffs that are affine in the gross return Y on each of finitely many
// intervals. Their first and second moments reduce to lognormal partial
// moments of order 0..2 on each interval.

#include <algorithm>
#include <initializer_list>
#include <vector>

#include "pension/market_model.hpp"

namespace pension {

/// g(y) = intercept + slope * y for y in (lo, hi].
struct AffinePiece {
  double lo = 0.0;
  double hi = kInf;
  double intercept = 0.0;
  double slope = 0.0;

  double operator()(double y) const { return intercept + slope * y; }
};

class PiecewiseAffine {
 public:
  PiecewiseAffine() = default;
  explicit PiecewiseAffine(std::vector<AffinePiece> pieces) : pieces_(std::move(pieces)) {}

  /// Splits (0, inf) at the given points and asks `local` for the affine
  /// coefficients valid inside each resulting interval. `local(y)` must
  /// return {intercept, slope} of the payoff around an interior point y.
  template <class LocalCoefficients>
  static PiecewiseAffine from_breakpoints(std::vector<double> breakpoints,
                                          LocalCoefficients&& local) {
    std::erase_if(breakpoints, [](double b) { return !(b > 0.0) || b == kInf; });
    std::sort(breakpoints.begin(), breakpoints.end());
    breakpoints.erase(std::unique(breakpoints.begin(), breakpoints.end()), breakpoints.end());

    std::vector<AffinePiece> pieces;
    double lo = 0.0;
    auto push = [&](double hi) {
      const double probe = hi == kInf ? 2.0 * lo + 1.0 : 0.5 * (lo + hi);
      const auto [a, b] = local(probe);
      if (!pieces.empty() && pieces.back().intercept == a && pieces.back().slope == b) {
        pieces.back().hi = hi;
      } else {
        pieces.push_back({lo, hi, a, b});
      }
      lo = hi;
    };
    for (double b : breakpoints) push(b);
    push(kInf);
    return PiecewiseAffine(std::move(pieces));
  }

  const std::vector<AffinePiece>& pieces() const { return pieces_; }

  double operator()(double y) const {
    for (const auto& p : pieces_)
      if (y > p.lo && y <= p.hi) return p(y);
    return 0.0;
  }

  /// E[g(Y)].
  double mean(const GbmParams& params) const {
    double total = 0.0;
    for (const auto& p : pieces_) {
      if (!(p.lo < p.hi)) continue;
      if (p.intercept != 0.0) total += p.intercept * partial_moment(params, 0, p.lo, p.hi);
      if (p.slope != 0.0) total += p.slope * partial_moment(params, 1, p.lo, p.hi);
    }
    return total;
  }

  /// E[g(Y)^2].
  double second_moment(const GbmParams& params) const {
    double total = 0.0;
    for (const auto& p : pieces_) {
      if (!(p.lo < p.hi)) continue;
      const double a = p.intercept;
      const double b = p.slope;
      total += a * a * partial_moment(params, 0, p.lo, p.hi);
      if (a != 0.0 && b != 0.0) total += 2.0 * a * b * partial_moment(params, 1, p.lo, p.hi);
      if (b != 0.0) total += b * b * partial_moment(params, 2, p.lo, p.hi);
    }
    return total;
  }

 private:
  std::vector<AffinePiece> pieces_;
};

}  // namespace pension
