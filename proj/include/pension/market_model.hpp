#pragma once

// Lognormal single-fund model: gross return Y = H_t / H_{t-1} ~ LN(mu, sigma^2)
// over a unit period, its density, truncated moments and path sampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/erf.hpp>

namespace pension {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct GbmParams {
  double mu = 0.0;     // per-period log drift
  double sigma = 1.0;  // per-period log volatility
  double x0 = 0.0;     // initial log price

  void validate() const {
    if (!std::isfinite(mu) || !std::isfinite(sigma) || !std::isfinite(x0))
      throw std::invalid_argument("GbmParams: non-finite field");
    if (!(sigma > 0.0))
      throw std::invalid_argument("GbmParams: sigma must be positive");
  }

  double initial_price() const { return std::exp(x0); }

  /// E[Y^n] of the lognormal gross return.
  double raw_moment(int n) const {
    return std::exp(n * mu + 0.5 * n * n * sigma * sigma);
  }

  /// E[rho] = E[Y] - 1.
  double mean_net_return() const { return std::expm1(mu + 0.5 * sigma * sigma); }
};

namespace detail {

inline double norm_cdf(double x) {
  if (x == kInf) return 1.0;
  if (x == -kInf) return 0.0;
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Phi(b) - Phi(a) for a <= b without cancellation in the upper tail.
inline double norm_mass(double a, double b) {
  if (!(a < b)) return 0.0;
  if (a > 0.0) return norm_cdf(-a) - norm_cdf(-b);
  return norm_cdf(b) - norm_cdf(a);
}

inline double norm_quantile(double u) {
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

}  // namespace detail

/// Density of Y at y > 0.
inline double density(const GbmParams& params, double y) {
  if (!(y > 0.0)) throw std::domain_error("density: y must be positive");
  const double s = params.sigma;
  const double z = (std::log(y) - params.mu) / s;
  return std::exp(-0.5 * z * z) / (std::sqrt(2.0 * std::numbers::pi) * y * s);
}

/// sup_y f(y), attained at y = exp(mu - sigma^2).
inline double density_sup(const GbmParams& params) {
  const double s = params.sigma;
  return std::exp(0.5 * s * s - params.mu) / (std::sqrt(2.0 * std::numbers::pi) * s);
}

/// P(lo < Y <= hi).
inline double probability(const GbmParams& params, double lo, double hi);

/// E[Y^order * 1{lo < Y <= hi}] for order in {0, 1, 2}; hi may be +inf.
inline double partial_moment(const GbmParams& params, int order, double lo, double hi) {
  if (order < 0 || order > 2)
    throw std::domain_error("partial_moment: order must be 0, 1 or 2");
  if (!(lo >= 0.0) || !(lo < hi))
    throw std::domain_error("partial_moment: need 0 <= lo < hi");
  const double s = params.sigma;
  const double shift = params.mu + order * s * s;
  auto d = [&](double c) {
    if (c <= 0.0) return -kInf;
    if (c == kInf) return kInf;
    return (std::log(c) - shift) / s;
  };
  return params.raw_moment(order) * detail::norm_mass(d(lo), d(hi));
}

inline double probability(const GbmParams& params, double lo, double hi) {
  lo = std::max(lo, 0.0);
  if (!(lo < hi)) return 0.0;
  return partial_moment(params, 0, lo, hi);
}

/// One realised sequence of per-period gross returns.
struct PathSample {
  std::vector<double> gross_returns;
  std::uint64_t seed = 0;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of an independent stream, e.g. one per Monte Carlo path. Depends
/// only on (seed, stream) so work can be split across threads freely.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// Lognormal gross-return generator; normals by inverse CDF.
class ReturnSampler {
 public:
  ReturnSampler(const GbmParams& params, std::uint64_t seed)
      : mu_(params.mu), sigma_(params.sigma), engine_(seed) {}

  double standard_normal() {
    // 53 random bits mapped to the open interval (0, 1).
    const double u = (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    return detail::norm_quantile(u);
  }

  double next() { return std::exp(mu_ + sigma_ * standard_normal()); }

 private:
  double mu_;
  double sigma_;
  std::mt19937_64 engine_;
};

inline std::vector<PathSample> sample_returns(const GbmParams& params, int periods,
                                              int n_paths, std::uint64_t seed) {
  params.validate();
  if (periods < 1) throw std::invalid_argument("sample_returns: T must be >= 1");
  if (n_paths < 1) throw std::invalid_argument("sample_returns: n_paths must be >= 1");
  std::vector<PathSample> out(static_cast<std::size_t>(n_paths));
  for (int p = 0; p < n_paths; ++p) {
    auto& path = out[static_cast<std::size_t>(p)];
    path.seed = derive_seed(seed, static_cast<std::uint64_t>(p));
    ReturnSampler sampler(params, path.seed);
    path.gross_returns.resize(static_cast<std::size_t>(periods));
    for (auto& y : path.gross_returns) y = sampler.next();
  }
  return out;
}

}  // namespace pension
