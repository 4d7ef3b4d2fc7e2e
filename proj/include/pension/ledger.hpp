#pragma once

// Shares of individuals in a collective account that receives contributions
// at discrete times and changes value in between.
//
// Event t records C_t (value before contributions) and the contributions
// J_t. The indices after the event are I_{t+1}, and the shares after the
// event are rho_{t+} = rho_{t+1}.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace pension {

enum class IndexRule { Proportional, Monotone };

template <class Real>
struct LedgerRecord {
  int t = 0;
  Real C_pre{};
  Real C_post{};
  // Entry j belongs to ids()[j]. Vectors only cover the ids known at the
  // time of the event; later ids are implicitly zero.
  std::vector<Real> contributions;
  std::vector<Real> index_before;
  std::vector<Real> index_after;
  std::vector<Real> shares_before;
  std::vector<Real> shares_after;
  std::vector<Real> direct_after;  // second route, proportional rule only
  Real common_rate{};              // monotone rule only
  std::vector<Real> rates;         // monotone rule only
};

struct RuleWitness {
  int event_time = 0;
  int share_time = 0;  // rho_{event_time+} = rho_{share_time}
  std::string id;
  std::string other_id;  // second individual of a failing pair, if any
  double lhs = 0.0;
  double rhs = 0.0;
};

struct RuleCheck {
  std::string rule;
  bool pass = true;
  std::optional<RuleWitness> witness;
};

/// New individual joining a replay of an existing ledger.
template <class Real>
struct NewContributor {
  std::string id;
  int t = 0;
  Real amount{};
};

namespace detail {

template <class Real>
double to_double(const Real& x) {
  if constexpr (std::is_arithmetic_v<Real>) {
    return static_cast<double>(x);
  } else {
    return static_cast<double>(x.numerator()) / static_cast<double>(x.denominator());
  }
}

template <class Real>
Real absolute(const Real& x) {
  return x < Real(0) ? -x : x;
}

// |a - b| <= tol * max(1, |a|, |b|); exact for non-floating types.
template <class Real>
bool near(const Real& a, const Real& b, double tol) {
  if constexpr (std::is_floating_point_v<Real>) {
    const Real scale = std::max({Real(1), absolute(a), absolute(b)});
    return absolute(a - b) <= Real(tol) * scale;
  } else {
    (void)tol;
    return a == b;
  }
}

template <class Real>
Real entry(const std::vector<Real>& v, std::size_t j) {
  return j < v.size() ? v[j] : Real(0);
}

template <class Real>
std::vector<Real> normalized(const std::vector<Real>& v) {
  Real total(0);
  for (const auto& x : v) total += x;
  std::vector<Real> out(v.size(), Real(0));
  if (total == Real(0)) return out;
  for (std::size_t j = 0; j < v.size(); ++j) out[j] = v[j] / total;
  return out;
}

}  // namespace detail

template <class Real>
class BasicLedger {
 public:
  using Contributions = std::vector<std::pair<std::string, Real>>;
  using Rates = std::map<std::string, Real>;

  static constexpr double kRouteTolerance = 1e-12;
  static constexpr double kCheckTolerance = 1e-9;

  explicit BasicLedger(IndexRule rule = IndexRule::Proportional, Real normalization = Real(100))
      : rule_(rule), normalization_(normalization) {
    if (normalization_ == Real(0))
      throw std::invalid_argument("ledger: normalisation constant must be non-zero");
  }

  IndexRule rule() const { return rule_; }
  Real normalization() const { return normalization_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<LedgerRecord<Real>>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  std::optional<std::size_t> position(const std::string& id) const {
    const auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) return std::nullopt;
    return static_cast<std::size_t>(it - ids_.begin());
  }

  /// Shares after the last event.
  std::vector<Real> shares() const {
    return records_.empty() ? std::vector<Real>{} : padded(records_.back().shares_after);
  }

  std::vector<Real> indices() const {
    return records_.empty() ? std::vector<Real>{} : padded(records_.back().index_after);
  }

  /// Proportional rule: I_{t+1} = I_t + (J_t / C_t) sum I_t, I_1 = 100 J_0 / J_0^1.
  void update_proportional(int t, Real C_pre, const Contributions& contributions) {
    if (rule_ != IndexRule::Proportional)
      throw std::logic_error("ledger: proportional update on a monotone ledger");
    LedgerRecord<Real> rec = begin_record(t, C_pre, contributions);
    const std::size_t n = ids_.size();
    const Real total = sum(rec.contributions);

    if (records_.empty()) {
      const Real ref = rec.contributions.front();
      rec.index_after.assign(n, Real(0));
      rec.direct_after.assign(n, Real(0));
      for (std::size_t j = 0; j < n; ++j) {
        rec.index_after[j] = rec.contributions[j] / ref * normalization_;
        rec.direct_after[j] = rec.contributions[j] / total;
      }
    } else {
      const auto& prev = records_.back();
      if (total > Real(0) && !(C_pre > Real(0)))
        throw std::domain_error("collective value non-positive; proportional rule undefined");
      const Real index_total = sum(rec.index_before);
      rec.index_after = rec.index_before;
      rec.direct_after = padded(prev.direct_after);
      if (total > Real(0)) {
        for (std::size_t j = 0; j < n; ++j) {
          rec.index_after[j] += rec.contributions[j] / C_pre * index_total;
          rec.direct_after[j] =
              (rec.direct_after[j] * C_pre + rec.contributions[j]) / (C_pre + total);
        }
      }
    }
    rec.shares_after = detail::normalized(rec.index_after);
    for (std::size_t j = 0; j < n; ++j) {
      if (!detail::near(rec.shares_after[j], rec.direct_after[j], kRouteTolerance))
        throw std::logic_error("ledger: index and direct share recursions disagree");
    }
    records_.push_back(std::move(rec));
  }

  /// Monotone rule: I_{t+1} = I_t (1 + a_t) + J_t, I_1 = J_0. `rate` applies
  /// to every individual not listed in `overrides`.
  void update_monotone(int t, Real C_pre, const Contributions& contributions, Real rate,
                       const Rates& overrides = {}) {
    if (rule_ != IndexRule::Monotone)
      throw std::logic_error("ledger: monotone update on a proportional ledger");
    if (rate < Real(0)) throw std::domain_error("ledger: negative artificial interest");
    for (const auto& [id, a] : overrides)
      if (a < Real(0)) throw std::domain_error("ledger: negative artificial interest");
    LedgerRecord<Real> rec = begin_record(t, C_pre, contributions);
    const std::size_t n = ids_.size();
    rec.common_rate = rate;
    rec.rates.assign(n, rate);
    for (std::size_t j = 0; j < n; ++j) {
      const auto it = overrides.find(ids_[j]);
      if (it != overrides.end()) rec.rates[j] = it->second;
    }
    rec.index_after.assign(n, Real(0));
    for (std::size_t j = 0; j < n; ++j) {
      const Real carried =
          records_.empty() ? Real(0) : rec.index_before[j] * (Real(1) + rec.rates[j]);
      rec.index_after[j] = carried + rec.contributions[j];
    }
    rec.shares_after = detail::normalized(rec.index_after);
    records_.push_back(std::move(rec));
  }

  /// Dispatches on the ledger's rule; `rate` is ignored by the proportional rule.
  void update(int t, Real C_pre, const Contributions& contributions, Real rate = Real(0),
              const Rates& overrides = {}) {
    if (rule_ == IndexRule::Proportional) {
      update_proportional(t, C_pre, contributions);
    } else {
      update_monotone(t, C_pre, contributions, rate, overrides);
    }
  }

  /// Shares in force at time t: those set by the last event strictly before t.
  std::vector<Real> index_for_pool(int t) const {
    if (t <= 0) throw std::domain_error("index_for_pool: no shares at t = 0");
    const LedgerRecord<Real>* last = nullptr;
    for (const auto& rec : records_)
      if (rec.t < t) last = &rec;
    if (!last) throw std::domain_error("index_for_pool: no contribution before t");
    return padded(last->shares_after);
  }

  /// Largest gap between the index route and the direct share recursion.
  double max_route_gap() const {
    double gap = 0.0;
    for (const auto& rec : records_)
      for (std::size_t j = 0; j < rec.direct_after.size(); ++j)
        gap = std::max(gap, detail::to_double(detail::absolute(rec.shares_after[j] -
                                                               rec.direct_after[j])));
    return gap;
  }

 private:
  LedgerRecord<Real> begin_record(int t, Real C_pre, const Contributions& contributions) {
    if (t < 0) throw std::domain_error("ledger: negative time");
    if (!records_.empty() && t <= records_.back().t)
      throw std::domain_error("ledger: event times must increase");
    if (records_.empty()) {
      if (C_pre != Real(0)) throw std::domain_error("ledger: collective must start empty");
      if (contributions.empty() || !(contributions.front().second > Real(0)))
        throw std::domain_error("ledger: the first listed individual must contribute first");
    }
    for (const auto& [id, amount] : contributions) {
      if (amount < Real(0)) throw std::domain_error("ledger: negative contribution");
      if (!position(id)) ids_.push_back(id);
    }
    LedgerRecord<Real> rec;
    rec.t = t;
    rec.C_pre = C_pre;
    rec.contributions.assign(ids_.size(), Real(0));
    for (const auto& [id, amount] : contributions) rec.contributions[*position(id)] += amount;
    rec.C_post = C_pre + sum(rec.contributions);
    if (records_.empty()) {
      rec.index_before.assign(ids_.size(), Real(0));
      rec.shares_before.assign(ids_.size(), Real(0));
    } else {
      rec.index_before = padded(records_.back().index_after);
      rec.shares_before = padded(records_.back().shares_after);
    }
    return rec;
  }

  std::vector<Real> padded(std::vector<Real> v) const {
    v.resize(ids_.size(), Real(0));
    return v;
  }

  static Real sum(const std::vector<Real>& v) {
    Real total(0);
    for (const auto& x : v) total += x;
    return total;
  }

  IndexRule rule_;
  Real normalization_;
  std::vector<std::string> ids_;
  std::vector<LedgerRecord<Real>> records_;
};

using Ledger = BasicLedger<double>;

// ---------------------------------------------------------------------------
// Rule checks

/// (Cont.): rho_t C_t + J_t = rho_{t+} C_{t+} for every event and individual.
template <class Real>
RuleCheck check_cont(const BasicLedger<Real>& ledger) {
  RuleCheck out{"Cont", true, std::nullopt};
  for (const auto& rec : ledger.records()) {
    for (std::size_t j = 0; j < rec.contributions.size(); ++j) {
      const Real lhs = detail::entry(rec.shares_before, j) * rec.C_pre + rec.contributions[j];
      const Real rhs = rec.shares_after[j] * rec.C_post;
      if (!detail::near(lhs, rhs, BasicLedger<Real>::kCheckTolerance)) {
        out.pass = false;
        out.witness = RuleWitness{rec.t, rec.t + 1, ledger.ids()[j], "",
                                  detail::to_double(lhs), detail::to_double(rhs)};
        return out;
      }
    }
  }
  return out;
}

/// (Fix): an event without contributions leaves every relative share as is.
template <class Real>
RuleCheck check_fix(const BasicLedger<Real>& ledger) {
  RuleCheck out{"Fix", true, std::nullopt};
  const auto& recs = ledger.records();
  for (std::size_t r = 1; r < recs.size(); ++r) {
    const auto& rec = recs[r];
    bool any = false;
    for (const auto& x : rec.contributions) any = any || x != Real(0);
    if (any) continue;
    for (std::size_t j = 0; j < rec.shares_after.size(); ++j) {
      if (!detail::near(rec.shares_after[j], rec.shares_before[j],
                        BasicLedger<Real>::kCheckTolerance)) {
        out.pass = false;
        out.witness = RuleWitness{rec.t, rec.t + 1, ledger.ids()[j], "",
                                  detail::to_double(rec.shares_before[j]),
                                  detail::to_double(rec.shares_after[j])};
        return out;
      }
    }
  }
  return out;
}

/// (Mon.): whoever has contributed at least as much as another individual at
/// every time up to t holds at least the same share after t.
template <class Real>
RuleCheck check_mon(const BasicLedger<Real>& ledger) {
  RuleCheck out{"Mon", true, std::nullopt};
  const auto& recs = ledger.records();
  const std::size_t n = ledger.ids().size();
  // dominates[j][k]: cumulative J^j >= cumulative J^k at every event so far.
  std::vector<std::vector<bool>> dominates(n, std::vector<bool>(n, true));
  std::vector<Real> cumulative(n, Real(0));
  for (const auto& rec : recs) {
    for (std::size_t j = 0; j < n; ++j) cumulative[j] += detail::entry(rec.contributions, j);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < n; ++k)
        if (cumulative[j] < cumulative[k]) dominates[j][k] = false;
    const std::size_t known = rec.shares_after.size();
    for (std::size_t j = 0; j < known; ++j) {
      for (std::size_t k = 0; k < known; ++k) {
        if (j == k || !dominates[j][k]) continue;
        const Real rj = rec.shares_after[j];
        const Real rk = rec.shares_after[k];
        if (rj < rk && !detail::near(rj, rk, BasicLedger<Real>::kCheckTolerance)) {
          out.pass = false;
          out.witness = RuleWitness{rec.t, rec.t + 1, ledger.ids()[j], ledger.ids()[k],
                                    detail::to_double(rj), detail::to_double(rk)};
          return out;
        }
      }
    }
  }
  return out;
}

/// (Lin.): at every event the absolute shares satisfy
///   rho_{t+}^j C_{t+} = kappa_t rho_t^j C_t + lambda_t J_t^j
/// with kappa_t, lambda_t common to all individuals. With `literal` set
/// kappa_t is fixed to 1, i.e. the change in absolute share is proportional
/// to the contribution.
template <class Real>
RuleCheck check_lin(const BasicLedger<Real>& ledger, bool literal = false) {
  RuleCheck out{"Lin", true, std::nullopt};
  const double tol = BasicLedger<Real>::kCheckTolerance;
  for (const auto& rec : ledger.records()) {
    const std::size_t n = rec.contributions.size();
    std::vector<Real> u(n), v(n), y(n);
    for (std::size_t j = 0; j < n; ++j) {
      u[j] = detail::entry(rec.shares_before, j) * rec.C_pre;
      v[j] = rec.contributions[j];
      y[j] = rec.shares_after[j] * rec.C_post;
    }
    if (literal) {
      for (std::size_t j = 0; j < n; ++j) y[j] -= u[j];
      std::fill(u.begin(), u.end(), Real(0));
    }
    Real uu(0), uv(0), vv(0), uy(0), vy(0);
    for (std::size_t j = 0; j < n; ++j) {
      uu += u[j] * u[j];
      uv += u[j] * v[j];
      vv += v[j] * v[j];
      uy += u[j] * y[j];
      vy += v[j] * y[j];
    }
    // Least squares for (kappa, lambda); collinear u, v reduce to one column.
    Real kappa(0), lambda(0);
    const Real det = uu * vv - uv * uv;
    bool collinear = det == Real(0);
    if constexpr (std::is_floating_point_v<Real>) collinear = det <= Real(1e-14) * uu * vv;
    if (!collinear) {
      kappa = (uy * vv - vy * uv) / det;
      lambda = (vy * uu - uy * uv) / det;
    } else if (vv > Real(0)) {
      lambda = vy / vv;
    } else if (uu > Real(0)) {
      kappa = uy / uu;
    }
    for (std::size_t j = 0; j < n; ++j) {
      const Real fit = kappa * u[j] + lambda * v[j];
      const Real scale = rec.C_post > Real(0) ? rec.C_post : Real(1);
      if (!detail::near(y[j] / scale, fit / scale, tol)) {
        out.pass = false;
        out.witness = RuleWitness{rec.t, rec.t + 1, ledger.ids()[j], "",
                                  detail::to_double(y[j]), detail::to_double(fit)};
        return out;
      }
    }
  }
  return out;
}

/// (Add): replays the ledger with one more individual contributing at an
/// existing event time. Growth factors C_{s+1} / C_{s+} of the collective are
/// kept, so later C values scale with the added money. The newcomer must get
/// a positive share, and the relative shares among the original individuals
/// must be unchanged at that event and after it.
template <class Real>
RuleCheck check_add(const BasicLedger<Real>& ledger, const NewContributor<Real>& newcomer) {
  RuleCheck out{"Add", true, std::nullopt};
  if (ledger.position(newcomer.id)) throw std::domain_error("check_add: id already in ledger");
  if (!(newcomer.amount > Real(0))) throw std::domain_error("check_add: amount must be positive");
  const auto& recs = ledger.records();
  const auto start = std::find_if(recs.begin(), recs.end(),
                                  [&](const auto& r) { return r.t == newcomer.t; });
  if (start == recs.end()) throw std::domain_error("check_add: time is not an event time");

  BasicLedger<Real> replay(ledger.rule(), ledger.normalization());
  Real prev_post_original(0), prev_post_replay(0);
  for (std::size_t r = 0; r < recs.size(); ++r) {
    const auto& rec = recs[r];
    typename BasicLedger<Real>::Contributions contributions;
    for (std::size_t j = 0; j < rec.contributions.size(); ++j)
      contributions.emplace_back(ledger.ids()[j], rec.contributions[j]);
    if (rec.t == newcomer.t) contributions.emplace_back(newcomer.id, newcomer.amount);

    Real C_pre = rec.C_pre;
    if (rec.t > newcomer.t) {
      if (prev_post_original == Real(0))
        throw std::domain_error("check_add: collective empty before a later event");
      C_pre = prev_post_replay * (rec.C_pre / prev_post_original);
    }
    typename BasicLedger<Real>::Rates overrides;
    for (std::size_t j = 0; j < rec.rates.size(); ++j)
      if (rec.rates[j] != rec.common_rate) overrides[ledger.ids()[j]] = rec.rates[j];
    replay.update(rec.t, C_pre, contributions, rec.common_rate, overrides);
    prev_post_original = rec.C_post;
    prev_post_replay = replay.records().back().C_post;

    if (rec.t < newcomer.t) continue;
    const auto& shared = replay.records().back().shares_after;
    const std::size_t newcomer_pos = *replay.position(newcomer.id);
    if (rec.t == newcomer.t && !(shared[newcomer_pos] > Real(0))) {
      out.pass = false;
      out.witness = RuleWitness{rec.t, rec.t + 1, newcomer.id, "",
                                detail::to_double(shared[newcomer_pos]), 0.0};
      return out;
    }
    Real incumbents_original(0), incumbents_replay(0);
    for (std::size_t j = 0; j < rec.shares_after.size(); ++j) {
      incumbents_original += rec.shares_after[j];
      incumbents_replay += shared[*replay.position(ledger.ids()[j])];
    }
    for (std::size_t j = 0; j < rec.shares_after.size(); ++j) {
      const Real a = rec.shares_after[j] / incumbents_original;
      const Real b = shared[*replay.position(ledger.ids()[j])] / incumbents_replay;
      if (!detail::near(a, b, BasicLedger<Real>::kCheckTolerance)) {
        out.pass = false;
        out.witness = RuleWitness{rec.t, rec.t + 1, ledger.ids()[j], newcomer.id,
                                  detail::to_double(a), detail::to_double(b)};
        return out;
      }
    }
  }
  return out;
}

}  // namespace pension
