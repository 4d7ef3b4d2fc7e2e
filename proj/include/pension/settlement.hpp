#pragma once

// Recursive settlement of simultaneous claims against a collective account
// that cannot cover all of them. Claims not exceeding their index share of
// the pool are paid in full, indices are renormalised over the remaining
// claimants and the step repeats. Once every remaining claim exceeds its
// share, each of them receives its share.

#include <cstddef>
#include <stdexcept>
#include <type_traits>
#include <utility>
#include <vector>

namespace pension {

template <class Real>
struct Settlement {
  std::vector<Real> allocations;
  Real remaining{};
  int rounds = 0;
};

namespace detail {

template <class Real>
Real index_sum_tolerance() {
  if constexpr (std::is_floating_point_v<Real>) {
    return Real(1e-12);
  } else {
    return Real(0);
  }
}

template <class Real>
Real abs_value(const Real& x) {
  return x < Real(0) ? -x : x;
}

}  // namespace detail

/// `claims` and `pool` are in the same unit (shares or currency). `indices`
/// must be non-negative and sum to one.
template <class Real>
Settlement<Real> settle(const std::vector<Real>& claims, const std::vector<Real>& indices,
                        Real pool) {
  const std::size_t n = claims.size();
  if (indices.size() != n) throw std::domain_error("settle: claims and indices differ in length");
  if (pool < Real(0)) throw std::domain_error("settle: negative pool");
  Real index_total(0);
  for (std::size_t j = 0; j < n; ++j) {
    if (claims[j] < Real(0)) throw std::domain_error("settle: negative claim");
    if (indices[j] < Real(0)) throw std::domain_error("settle: negative index");
    index_total += indices[j];
  }
  if (n > 0 && detail::abs_value(index_total - Real(1)) > detail::index_sum_tolerance<Real>())
    throw std::domain_error("settle: indices must sum to 1");

  Settlement<Real> out;
  out.allocations.assign(n, Real(0));
  std::vector<std::size_t> open(n);
  for (std::size_t j = 0; j < n; ++j) open[j] = j;

  while (!open.empty()) {
    ++out.rounds;
    Real weight(0);
    for (std::size_t j : open) weight += indices[j];

    // claim <= (w / W) * pool, written without division; ties are payable.
    std::vector<std::size_t> still_open;
    Real paid(0);
    for (std::size_t j : open) {
      if (claims[j] * weight <= indices[j] * pool && (weight > Real(0) || claims[j] == Real(0))) {
        out.allocations[j] = claims[j];
        paid += claims[j];
      } else {
        still_open.push_back(j);
      }
    }

    if (still_open.size() == open.size() || weight == Real(0)) {
      // Nothing coverable: pay every remaining claimant its share and stop.
      if (weight > Real(0)) {
        for (std::size_t j : still_open) {
          const Real share = indices[j] * pool / weight;
          out.allocations[j] = claims[j] < share ? claims[j] : share;
          paid += out.allocations[j];
        }
      }
      pool -= paid;
      break;
    }
    pool -= paid;
    open = std::move(still_open);
  }
  // Rounding in the final shares may leave a negative dust amount.
  out.remaining = pool < Real(0) ? Real(0) : pool;
  return out;
}

}  // namespace pension
