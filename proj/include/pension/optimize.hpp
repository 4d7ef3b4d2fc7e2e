#pragma once

// Grid scan + golden-section refinement for possibly multimodal scalar
// objectives on an interval. Grid local maxima separated by a dip deeper
// than `tie_tolerance` are reported as distinct modes.

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

namespace pension {

struct Mode {
  double x = 0.0;
  double value = 0.0;
};

struct GridMaximum {
  Mode best;
  std::vector<Mode> modes;  // refined local maxima, ordered by x
  std::vector<Mode> tied;   // modes within tie tolerance of best, ordered by x
  bool tie = false;
};

/// Golden-section search for a maximum of a unimodal f on [a, b].
template <class F>
Mode golden_section_max(F&& f, double a, double b, double tol = 1e-10, int max_iter = 200) {
  if (!(a <= b)) throw std::invalid_argument("golden_section_max: a > b");
  static const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1);
  double f2 = f(x2);
  for (int it = 0; it < max_iter && (b - a) > tol; ++it) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  // The interval endpoints may beat the interior probes (monotone f).
  Mode best{x1, f1};
  if (f2 > best.value) best = {x2, f2};
  for (double x : {a, b}) {
    const double v = f(x);
    if (v > best.value) best = {x, v};
  }
  return best;
}

struct GridOptions {
  int points = 2001;
  double tol = 1e-10;
  double tie_tolerance = 1e-6;
};

/// Maximises f over [lo, hi]. Points where `feasible` is false are skipped.
template <class F>
GridMaximum maximize_on_grid(F&& f, double lo, double hi, const GridOptions& opt,
                             const std::function<bool(double)>& feasible = {}) {
  if (opt.points < 2) throw std::invalid_argument("maximize_on_grid: need >= 2 points");
  if (!(lo <= hi)) throw std::invalid_argument("maximize_on_grid: lo > hi");

  const int n = lo == hi ? 1 : opt.points;
  std::vector<double> xs(static_cast<std::size_t>(n));
  std::vector<std::optional<double>> vs(static_cast<std::size_t>(n));
  bool any = false;
  for (int i = 0; i < n; ++i) {
    const double x = n == 1 ? lo : (i == n - 1 ? hi : lo + (hi - lo) * i / (n - 1));
    xs[static_cast<std::size_t>(i)] = x;
    if (!feasible || feasible(x)) {
      vs[static_cast<std::size_t>(i)] = f(x);
      any = true;
    }
  }
  if (!any) throw std::domain_error("maximize_on_grid: no feasible grid point");

  auto value_at = [&](int i) -> std::optional<double> {
    if (i < 0 || i >= n) return std::nullopt;
    return vs[static_cast<std::size_t>(i)];
  };

  // Grid local maxima: no feasible neighbour is strictly larger.
  std::vector<int> peaks;
  for (int i = 0; i < n; ++i) {
    const auto v = value_at(i);
    if (!v) continue;
    const auto l = value_at(i - 1);
    const auto r = value_at(i + 1);
    if ((!l || *v >= *l) && (!r || *v >= *r)) peaks.push_back(i);
  }

  // Merge neighbouring peaks unless a dip deeper than the tie tolerance (or
  // an infeasible gap) separates them.
  std::vector<int> merged;
  for (int i : peaks) {
    if (merged.empty()) {
      merged.push_back(i);
      continue;
    }
    const int j = merged.back();
    double dip = std::min(*value_at(i), *value_at(j));
    bool gap = false;
    for (int m = j + 1; m < i; ++m) {
      const auto v = value_at(m);
      if (!v) {
        gap = true;
        break;
      }
      dip = std::min(dip, *v);
    }
    const double floor = std::min(*value_at(i), *value_at(j)) - opt.tie_tolerance;
    if (!gap && dip >= floor) {
      if (*value_at(i) > *value_at(j)) merged.back() = i;
    } else {
      merged.push_back(i);
    }
  }

  GridMaximum out;
  for (int i : merged) {
    const double xi = xs[static_cast<std::size_t>(i)];
    double a = xs[static_cast<std::size_t>(std::max(i - 1, 0))];
    double b = xs[static_cast<std::size_t>(std::min(i + 1, n - 1))];
    // Next to an infeasible grid point, bisect for the edge of the feasible set.
    auto edge = [&](double out_x) {
      double in_x = xi;
      while (std::abs(in_x - out_x) > opt.tol) {
        const double mid = 0.5 * (in_x + out_x);
        (feasible(mid) ? in_x : out_x) = mid;
      }
      return in_x;
    };
    if (i > 0 && !value_at(i - 1)) a = edge(a);
    if (i < n - 1 && !value_at(i + 1)) b = edge(b);
    Mode m = golden_section_max(f, a, b, opt.tol);
    if (m.value < *value_at(i) || (feasible && !feasible(m.x))) m = {xi, *value_at(i)};
    out.modes.push_back(m);
  }
  out.best = *std::max_element(out.modes.begin(), out.modes.end(),
                               [](const Mode& l, const Mode& r) { return l.value < r.value; });
  for (const auto& m : out.modes)
    if (m.value >= out.best.value - opt.tie_tolerance) out.tied.push_back(m);
  out.tie = out.tied.size() >= 2;
  return out;
}

}  // namespace pension
