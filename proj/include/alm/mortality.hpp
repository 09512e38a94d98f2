#pragma once

// Liability side: the mortality table and annuitant portfolio, plus the
// benefit flows and reserves derived from them.
//
// Timing: the annuity for year t (t = 1, 2, ...) is paid at the start of that
// year to annuitants still alive, i.e. whose curtate lifetime K satisfies
// K >= t. Valuation sums start at t = 1.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "alm/errors.hpp"
#include "alm/market.hpp"
#include "alm/rng.hpp"

namespace alm {

/// Survivor counts l_x on contiguous integer ages, ending at the terminal age
/// omega with l_omega = 0.
class MortalityTable {
 public:
  MortalityTable(int base_age, std::vector<double> lx) : base_age_(base_age), lx_(std::move(lx)) {
    if (lx_.size() < 2) throw InputError("mortality table: need at least two ages");
    if (base_age_ < 0) throw InputError("mortality table: negative base age");
    for (std::size_t k = 0; k < lx_.size(); ++k) {
      const double v = lx_[k];
      const std::string age = std::to_string(base_age_ + static_cast<int>(k));
      if (!std::isfinite(v) || v < 0.0) throw InputError("mortality table: lx < 0 at age " + age);
      if (k > 0 && v > lx_[k - 1]) {
        throw InputError("mortality table: lx increases at age " + age);
      }
    }
    if (lx_.back() != 0.0) throw InputError("mortality table: lx at the terminal age must be 0");
  }

  int base_age() const { return base_age_; }
  int omega() const { return base_age_ + static_cast<int>(lx_.size()) - 1; }
  bool contains(int age) const { return age >= base_age_ && age <= omega(); }

  /// l_x; zero beyond omega.
  double lx(int age) const {
    if (age > omega()) return 0.0;
    if (age < base_age_) throw InputError("age " + std::to_string(age) + " below table range");
    return lx_[static_cast<std::size_t>(age - base_age_)];
  }

  /// One-year survival probability from age x to x+1 (0 once l_x = 0).
  double survival(int age) const {
    const double now = lx(age);
    return now > 0.0 ? lx(age + 1) / now : 0.0;
  }

  /// t-year survival probability l_{x+t}/l_x (0 once l_x = 0).
  double survival(int age, int years) const {
    const double now = lx(age);
    return now > 0.0 ? lx(age + years) / now : 0.0;
  }

  const std::vector<double>& values() const { return lx_; }

 private:
  int base_age_;
  std::vector<double> lx_;
};

struct Annuitant {
  int age0 = 0;         // age at t = 0
  double annuity = 0.;  // paid at the start of each year while alive
};

struct AnnuityPortfolio {
  std::vector<Annuitant> annuitants;

  std::size_t size() const { return annuitants.size(); }
  bool empty() const { return annuitants.empty(); }

  /// k identical copies of every annuitant, each with its own lifetime.
  AnnuityPortfolio replicated(std::size_t k) const {
    AnnuityPortfolio out;
    out.annuitants.reserve(annuitants.size() * k);
    for (std::size_t c = 0; c < k; ++c) {
      out.annuitants.insert(out.annuitants.end(), annuitants.begin(), annuitants.end());
    }
    return out;
  }
};

/// Flows for years t = 1..horizon; flows[t-1] is the year-t amount.
struct CashFlowSchedule {
  std::vector<double> flows;

  std::size_t horizon() const { return flows.size(); }
  /// Year-t flow, 1-based; zero beyond the horizon.
  double at(std::size_t t) const { return t >= 1 && t <= flows.size() ? flows[t - 1] : 0.0; }

  /// Flows after year t, re-indexed so that year t+k becomes year k.
  CashFlowSchedule tail(std::size_t t) const {
    if (t >= flows.size()) return {};
    return {{flows.begin() + static_cast<std::ptrdiff_t>(t), flows.end()}};
  }

  CashFlowSchedule scaled(double factor) const {
    CashFlowSchedule out = *this;
    for (double& f : out.flows) f *= factor;
    return out;
  }
};

/// Curtate lifetimes of one simulated mortality path: annuitant j is alive at
/// the start of year t iff lifetimes[j] >= t.
using MortalityPath = std::vector<int>;

inline void check_portfolio(const AnnuityPortfolio& portfolio, const MortalityTable& table) {
  if (portfolio.empty()) throw InputError("portfolio is empty");
  for (const auto& a : portfolio.annuitants) {
    if (!table.contains(a.age0)) {
      throw InputError("annuitant age " + std::to_string(a.age0) + " outside table range [" +
                       std::to_string(table.base_age()) + ", " + std::to_string(table.omega()) +
                       "]");
    }
    if (!(a.annuity >= 0.0) || !std::isfinite(a.annuity)) {
      throw InputError("annuity amount must be finite and >= 0");
    }
  }
}

/// Number of years until the youngest annuitant reaches omega.
inline std::size_t liability_horizon(const AnnuityPortfolio& portfolio,
                                     const MortalityTable& table) {
  int youngest = table.omega();
  for (const auto& a : portfolio.annuitants) youngest = std::min(youngest, a.age0);
  return static_cast<std::size_t>(table.omega() - youngest);
}

/// F_t = sum_j f_j l_{x_j+t} / l_{x_j}, t = 1..max_j(omega - x_j).
inline CashFlowSchedule expected_flows(const AnnuityPortfolio& portfolio,
                                       const MortalityTable& table) {
  check_portfolio(portfolio, table);
  CashFlowSchedule out;
  out.flows.assign(liability_horizon(portfolio, table), 0.0);
  for (const auto& a : portfolio.annuitants) {
    const double base = table.lx(a.age0);
    if (base <= 0.0) continue;
    for (int t = 1; a.age0 + t < table.omega(); ++t) {
      out.flows[static_cast<std::size_t>(t - 1)] += a.annuity * table.lx(a.age0 + t) / base;
    }
  }
  return out;
}

/// Present value at rate i of a schedule: sum_t F_t (1+i)^-t.
inline double reserve(const CashFlowSchedule& schedule, double i) {
  if (!(i > -1.0)) throw InputError("discount rate must be > -1");
  const double v = 1.0 / (1.0 + i);
  double discount = 1.0;
  double total = 0.0;
  for (double f : schedule.flows) {
    discount *= v;
    total += f * discount;
  }
  return total;
}

/// Reserve at time t on a deterministic schedule: sum_{k>=1} F_{t+k} (1+i)^-k.
inline double reserve_at(const CashFlowSchedule& schedule, double i, std::size_t t) {
  return reserve(schedule.tail(t), i);
}

/// Macaulay duration in years.
inline double macaulay_duration(const CashFlowSchedule& schedule, double i) {
  if (!(i > -1.0)) throw InputError("discount rate must be > -1");
  const double v = 1.0 / (1.0 + i);
  double discount = 1.0;
  double value = 0.0;
  double weighted = 0.0;
  bool positive = false;
  for (std::size_t k = 0; k < schedule.flows.size(); ++k) {
    discount *= v;
    const double f = schedule.flows[k];
    positive = positive || f > 0.0;
    value += f * discount;
    weighted += static_cast<double>(k + 1) * f * discount;
  }
  if (!positive) throw ComputationError("duration undefined for a schedule without positive flows");
  return weighted / value;
}

/// Draws one curtate lifetime per annuitant by year-by-year survival trials.
inline MortalityPath simulate_lifetimes(const AnnuityPortfolio& portfolio,
                                        const MortalityTable& table, RandomStream& stream) {
  check_portfolio(portfolio, table);
  MortalityPath lifetimes(portfolio.size(), 0);
  for (std::size_t j = 0; j < portfolio.size(); ++j) {
    int age = portfolio.annuitants[j].age0;
    int years = 0;
    while (age < table.omega() && stream.bernoulli(table.survival(age))) {
      ++years;
      ++age;
    }
    lifetimes[j] = years;
  }
  return lifetimes;
}

/// Realized flows of one mortality path over the given horizon.
inline CashFlowSchedule flows_from_lifetimes(const AnnuityPortfolio& portfolio,
                                             const MortalityPath& lifetimes,
                                             std::size_t horizon) {
  CashFlowSchedule out;
  out.flows.assign(horizon, 0.0);
  for (std::size_t j = 0; j < portfolio.size(); ++j) {
    const auto paid_years = std::min<std::size_t>(static_cast<std::size_t>(lifetimes[j]), horizon);
    for (std::size_t t = 1; t <= paid_years; ++t) out.flows[t - 1] += portfolio.annuitants[j].annuity;
  }
  return out;
}

/// One realization of the benefit flows.
inline CashFlowSchedule simulate_flows(const AnnuityPortfolio& portfolio,
                                       const MortalityTable& table, RandomStream& stream) {
  const MortalityPath lifetimes = simulate_lifetimes(portfolio, table, stream);
  return flows_from_lifetimes(portfolio, lifetimes, liability_horizon(portfolio, table));
}

/// Survivor indicator at the start of year t (t = 0 gives everyone).
inline std::vector<bool> survivors_at(const MortalityPath& lifetimes, std::size_t t) {
  std::vector<bool> alive(lifetimes.size());
  for (std::size_t j = 0; j < lifetimes.size(); ++j) {
    alive[j] = static_cast<std::size_t>(lifetimes[j]) >= t;
  }
  return alive;
}

/// E[F_{t+k} | survivors at t] for k = 1..(horizon - t): the survivors, aged
/// t years further, valued as a fresh portfolio.
inline CashFlowSchedule conditional_expected_flows(const AnnuityPortfolio& portfolio,
                                                   const std::vector<bool>& alive, std::size_t t,
                                                   const MortalityTable& table) {
  if (alive.size() != portfolio.size()) {
    throw InputError("survivor set size does not match the portfolio");
  }
  check_portfolio(portfolio, table);
  const std::size_t horizon = liability_horizon(portfolio, table);
  CashFlowSchedule out;
  out.flows.assign(horizon > t ? horizon - t : 0, 0.0);
  const int shift = static_cast<int>(t);
  for (std::size_t j = 0; j < portfolio.size(); ++j) {
    if (!alive[j]) continue;
    const auto& a = portfolio.annuitants[j];
    const int age = a.age0 + shift;
    const double base = table.lx(age);
    if (base <= 0.0) continue;
    for (int k = 1; age + k < table.omega(); ++k) {
      out.flows[static_cast<std::size_t>(k - 1)] += a.annuity * table.lx(age + k) / base;
    }
  }
  return out;
}

/// Expected flows multiplied by the expected price index ratio for each year
/// ahead, given the current inflation driver x_t.
inline CashFlowSchedule indexed_flows(const CashFlowSchedule& schedule,
                                      const InflationParams& infl, double x_t) {
  validate(infl);
  CashFlowSchedule out = schedule;
  for (std::size_t k = 0; k < out.flows.size(); ++k) {
    out.flows[k] *= inflation_factor(x_t, infl, static_cast<double>(k + 1));
  }
  return out;
}

/// Reserve of inflation-indexed annuities: sum_k F_k E[I_{t+k}/I_t | x_t] (1+i)^-k,
/// with the schedule holding the expected future flows seen from time t.
inline double indexed_reserve(const CashFlowSchedule& schedule, double i,
                              const InflationParams& infl, double x_t) {
  return reserve(indexed_flows(schedule, infl, x_t), i);
}

/// Life annuity factors a_x = sum_{k>=1} l_{x+k}/l_x (1+i)^-k for every table
/// age, so that a survivor set's reserve is sum_j f_j a_{x_j+t}.
class AnnuityFactors {
 public:
  AnnuityFactors(const MortalityTable& table, double i) : base_age_(table.base_age()) {
    if (!(i > -1.0)) throw InputError("discount rate must be > -1");
    const double v = 1.0 / (1.0 + i);
    factors_.assign(table.values().size(), 0.0);
    for (int age = table.base_age(); age <= table.omega(); ++age) {
      const double base = table.lx(age);
      if (base <= 0.0) continue;
      double discount = 1.0;
      double total = 0.0;
      for (int k = 1; age + k < table.omega(); ++k) {
        discount *= v;
        total += table.lx(age + k) / base * discount;
      }
      factors_[static_cast<std::size_t>(age - base_age_)] = total;
    }
  }

  double at(int age) const {
    const auto idx = static_cast<std::size_t>(age - base_age_);
    return idx < factors_.size() ? factors_[idx] : 0.0;
  }

 private:
  int base_age_;
  std::vector<double> factors_;
};

}  // namespace alm
