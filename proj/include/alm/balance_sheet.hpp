#pragma once

// Balance sheet of a closed annuity fund along one market scenario.
//
// Assets are invested at t = 0 with a risky share theta. Under buy-and-hold
// the fund is never re-weighted and benefits are paid by selling units pro
// rata, which gives the closed form
//
//   A_t = w_t [A_0 - sum_{s<=t} P_s / w_s],   w_t = theta X_t + (1-theta) Y_t.
//
// Under annual rebalancing the weights are reset to theta every year:
//
//   A_{t+1} = (theta X_{t+1}/X_t + (1-theta) Y_{t+1}/Y_t) A_t - P_{t+1}.
//
// Liabilities are either the deterministic reserve recursion, the reserve of
// the survivors of a simulated mortality path, or an inflation-indexed reserve
// driven by the scenario's OU state.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "alm/errors.hpp"
#include "alm/market.hpp"
#include "alm/mortality.hpp"

namespace alm {

enum class Dynamics { buy_and_hold, rebalance };
enum class MortalityMode { deterministic, stochastic };

struct RunConfig {
  double theta = 0.0;
  double e0_ratio = 0.04;
  Dynamics dynamics = Dynamics::buy_and_hold;
  bool indexation = false;
  MortalityMode mortality_mode = MortalityMode::deterministic;
};

inline void validate(const RunConfig& cfg) {
  if (!(cfg.theta >= 0.0 && cfg.theta <= 1.0)) throw ValidationError("theta", "must lie in [0, 1]");
  if (!(cfg.e0_ratio >= 0.0) || !std::isfinite(cfg.e0_ratio)) {
    throw ValidationError("e0_ratio", "must be >= 0");
  }
}

/// Everything on the liability side that does not depend on the scenario.
class LiabilityModel {
 public:
  LiabilityModel(AnnuityPortfolio portfolio, MortalityTable table, double i,
                 std::optional<InflationParams> infl = std::nullopt)
      : portfolio_(std::move(portfolio)),
        table_(std::move(table)),
        i_(i),
        infl_(infl),
        expected_(expected_flows(portfolio_, table_)),
        factors_(table_, i) {
    if (infl_) validate(*infl_);
    reserve0_ = reserve(expected_, i_);
  }

  const AnnuityPortfolio& portfolio() const { return portfolio_; }
  const MortalityTable& table() const { return table_; }
  double rate() const { return i_; }
  const std::optional<InflationParams>& inflation() const { return infl_; }
  const CashFlowSchedule& expected() const { return expected_; }
  const AnnuityFactors& annuity_factors() const { return factors_; }
  std::size_t horizon() const { return expected_.horizon(); }

  /// Flat reserve L_0.
  double reserve0() const { return reserve0_; }

  /// Indexed reserve L_0^I at the initial OU state.
  double indexed_reserve0() const {
    if (!infl_) throw InputError("indexed reserve requested without inflation parameters");
    return indexed_reserve(expected_, i_, *infl_, infl_->x0);
  }

 private:
  AnnuityPortfolio portfolio_;
  MortalityTable table_;
  double i_;
  std::optional<InflationParams> infl_;
  CashFlowSchedule expected_;
  AnnuityFactors factors_;
  double reserve0_ = 0.0;
};

/// Benefits paid and reserve held at each t = 0..horizon along one scenario
/// (and mortality path). paid[0] = 0. Independent of theta.
struct LiabilityTrack {
  std::vector<double> paid;
  std::vector<double> reserve;
};

/// L_{t+1} = (1+i) L_t - F_{t+1}, started from L_0 = reserve(F).
inline std::vector<double> reserve_recursion(const CashFlowSchedule& flows, double i) {
  std::vector<double> out(flows.horizon() + 1);
  out[0] = reserve(flows, i);
  for (std::size_t t = 1; t < out.size(); ++t) out[t] = (1.0 + i) * out[t - 1] - flows.at(t);
  return out;
}

inline LiabilityTrack liability_track(const LiabilityModel& model, const PathView& path,
                                      const RunConfig& cfg,
                                      const MortalityPath* mortality = nullptr) {
  const std::size_t horizon = model.horizon();
  if (path.X.size() < horizon + 1) {
    throw InputError("scenario horizon " + std::to_string(path.X.size() - 1) +
                     " shorter than liability horizon " + std::to_string(horizon));
  }
  const bool stochastic = cfg.mortality_mode == MortalityMode::stochastic;
  if (stochastic && (mortality == nullptr || mortality->size() != model.portfolio().size())) {
    throw InputError("stochastic mortality run needs one lifetime per annuitant");
  }
  if (cfg.indexation && !model.inflation()) {
    throw InputError("indexation requested without inflation parameters");
  }

  LiabilityTrack track;
  track.paid.assign(horizon + 1, 0.0);
  track.reserve.assign(horizon + 1, 0.0);
  const double i = model.rate();
  const auto& annuitants = model.portfolio().annuitants;

  if (!stochastic) {
    for (std::size_t t = 1; t <= horizon; ++t) track.paid[t] = model.expected().at(t);
  } else {
    for (std::size_t j = 0; j < annuitants.size(); ++j) {
      const auto last = std::min<std::size_t>(static_cast<std::size_t>((*mortality)[j]), horizon);
      for (std::size_t t = 1; t <= last; ++t) track.paid[t] += annuitants[j].annuity;
    }
  }

  if (!cfg.indexation) {
    if (!stochastic) {
      for (std::size_t t = 0; t <= horizon; ++t) {
        track.reserve[t] = reserve_at(model.expected(), i, t);
      }
    } else {
      const auto& factors = model.annuity_factors();
      for (std::size_t j = 0; j < annuitants.size(); ++j) {
        const auto last = std::min<std::size_t>(static_cast<std::size_t>((*mortality)[j]), horizon);
        for (std::size_t t = 0; t <= last; ++t) {
          track.reserve[t] += annuitants[j].annuity *
                              factors.at(annuitants[j].age0 + static_cast<int>(t));
        }
      }
    }
    return track;
  }

  // Indexed: payments are revalued by the realized index ratio, reserves by
  // the conditional expected index ratio from the current OU state, and both
  // are expressed in money of the payment date (hence the I_t factor).
  const InflationParams& infl = *model.inflation();
  for (std::size_t t = 1; t <= horizon; ++t) track.paid[t] *= path.I[t];
  for (std::size_t t = 0; t <= horizon; ++t) {
    const CashFlowSchedule future =
        stochastic ? conditional_expected_flows(model.portfolio(), survivors_at(*mortality, t), t,
                                                model.table())
                   : model.expected().tail(t);
    track.reserve[t] = path.I[t] * indexed_reserve(future, i, infl, path.x[t]);
  }
  return track;
}

namespace detail {

/// Evolves assets from a0 and calls visit(t, A_t) for t = 0..horizon. Once
/// assets are exhausted (A <= 0) they stop earning returns and later benefits
/// accumulate as unpaid.
template <typename Visit>
void evolve_assets(const PathView& path, const LiabilityTrack& track, double theta,
                   Dynamics dynamics, double a0, Visit&& visit) {
  const std::size_t horizon = track.paid.size() - 1;
  double assets = a0;
  visit(std::size_t{0}, assets);
  bool exhausted = assets <= 0.0;
  if (dynamics == Dynamics::buy_and_hold) {
    double units = a0;  // value of the fund in units of w
    for (std::size_t t = 1; t <= horizon; ++t) {
      if (exhausted) {
        assets -= track.paid[t];
      } else {
        const double w = theta * path.X[t] + (1.0 - theta) * path.Y[t];
        units -= track.paid[t] / w;
        assets = w * units;
        exhausted = assets <= 0.0;
      }
      visit(t, assets);
    }
  } else {
    for (std::size_t t = 1; t <= horizon; ++t) {
      if (exhausted) {
        assets -= track.paid[t];
      } else {
        const double growth =
            theta * path.X[t] / path.X[t - 1] + (1.0 - theta) * path.Y[t] / path.Y[t - 1];
        assets = growth * assets - track.paid[t];
        exhausted = assets <= 0.0;
      }
      visit(t, assets);
    }
  }
}

}  // namespace detail

struct BalanceSheetPath {
  std::vector<double> A, L, E;
  std::optional<std::size_t> ruin_year_accounting;  // first t with E_t < 0
  std::optional<std::size_t> ruin_year_economic;    // first t with A_t <= 0

  /// max(0, -min_t E_t).
  double ruin_magnitude() const {
    double worst = 0.0;
    for (double e : E) worst = std::min(worst, e);
    return -worst;
  }
};

/// Initial assets (1 + e0_ratio) L_0.
inline double initial_assets(const LiabilityTrack& track, const RunConfig& cfg) {
  return (1.0 + cfg.e0_ratio) * track.reserve[0];
}

/// Balance sheet for one theta given a precomputed liability track.
inline BalanceSheetPath balance_sheet(const PathView& path, const LiabilityTrack& track,
                                      const RunConfig& cfg) {
  validate(cfg);
  BalanceSheetPath out;
  const std::size_t n = track.paid.size();
  out.A.resize(n);
  out.L = track.reserve;
  out.E.resize(n);
  detail::evolve_assets(path, track, cfg.theta, cfg.dynamics, initial_assets(track, cfg),
                        [&](std::size_t t, double a) {
                          out.A[t] = a;
                          out.E[t] = a - track.reserve[t];
                          if (!out.ruin_year_accounting && out.E[t] < 0.0) {
                            out.ruin_year_accounting = t;
                          }
                          if (!out.ruin_year_economic && a <= 0.0) out.ruin_year_economic = t;
                        });
  return out;
}

/// Balance sheet of one scenario path for one configuration.
inline BalanceSheetPath run_path(const PathView& path, const LiabilityModel& model,
                                 const RunConfig& cfg, const MortalityPath* mortality = nullptr) {
  validate(cfg);
  return balance_sheet(path, liability_track(model, path, cfg, mortality), cfg);
}

/// Buy-and-hold assets by the year-by-year recursion
/// A_t = (w_t / w_{t-1}) A_{t-1} - P_t. Algebraically equal to the closed form
/// while assets stay positive.
inline std::vector<double> buy_and_hold_recursive(const PathView& path,
                                                  const std::vector<double>& paid, double theta,
                                                  double a0) {
  std::vector<double> out(paid.size());
  out[0] = a0;
  double w_prev = theta * path.X[0] + (1.0 - theta) * path.Y[0];
  for (std::size_t t = 1; t < paid.size(); ++t) {
    const double w = theta * path.X[t] + (1.0 - theta) * path.Y[t];
    out[t] = w / w_prev * out[t - 1] - paid[t];
    w_prev = w;
  }
  return out;
}

/// Closed product form of the buy-and-hold fund value, without the
/// exhaustion freeze.
inline std::vector<double> buy_and_hold_closed_form(const PathView& path,
                                                    const std::vector<double>& paid,
                                                    double theta, double a0) {
  std::vector<double> out(paid.size());
  out[0] = a0;
  double discounted = 0.0;
  for (std::size_t t = 1; t < paid.size(); ++t) {
    const double w = theta * path.X[t] + (1.0 - theta) * path.Y[t];
    discounted += paid[t] / w;
    out[t] = w * (a0 - discounted);
  }
  return out;
}

struct SubmartingaleDiagnostic {
  std::size_t year = 0;
  double mean_equity_now = 0.0;
  double mean_equity_next = 0.0;
  double std_error_next = 0.0;
  double threshold = 0.0;  // (1+i) * mean E_t
  double z_score = 0.0;    // (mean E_{t+1} - threshold) / SE
  bool passes = false;
  std::string message;
};

/// Empirical check of E[E_{t+1}] >= (1+i) E[E_t] across paths, within three
/// standard errors. Unconditional means stand in for conditional ones, which
/// is exact at t = 0.
inline SubmartingaleDiagnostic submartingale_check(const std::vector<BalanceSheetPath>& paths,
                                                   double i, std::size_t year = 0,
                                                   bool rate_ordering_holds = true) {
  SubmartingaleDiagnostic d;
  d.year = year;
  if (paths.empty()) {
    d.message = "no paths";
    return d;
  }
  const double n = static_cast<double>(paths.size());
  double sum_now = 0.0;
  double sum_next = 0.0;
  for (const auto& p : paths) {
    if (p.E.size() < year + 2) throw InputError("submartingale_check: path shorter than year + 1");
    sum_now += p.E[year];
    sum_next += p.E[year + 1];
  }
  d.mean_equity_now = sum_now / n;
  d.mean_equity_next = sum_next / n;
  double ss = 0.0;
  for (const auto& p : paths) {
    const double dev = p.E[year + 1] - d.mean_equity_next;
    ss += dev * dev;
  }
  d.std_error_next = paths.size() > 1 ? std::sqrt(ss / (n - 1.0) / n) : 0.0;
  d.threshold = (1.0 + i) * d.mean_equity_now;
  const double gap = d.mean_equity_next - d.threshold;
  d.z_score = d.std_error_next > 0.0 ? gap / d.std_error_next
                                     : (gap >= 0.0 ? std::numeric_limits<double>::infinity()
                                                   : -std::numeric_limits<double>::infinity());
  d.passes = gap >= -3.0 * d.std_error_next;
  if (d.passes) {
    d.message = "mean equity grows at least at the technical rate";
  } else if (!rate_ordering_holds) {
    d.message = "mean equity grows slower than the technical rate; expected, since the rate "
                "ordering mu >= r_inf >= ln(1+i) does not hold";
  } else {
    d.message = "mean equity grows slower than the technical rate";
  }
  return d;
}

inline bool rate_ordering_holds(const MarketParams& m) {
  const double tech = std::log1p(m.i);
  return m.mu >= m.r_inf && m.r_inf >= tech && tech >= 0.0;
}

/// Audit dump rows: path, year, A, L, E.
inline void write_balance_sheet_csv(std::ostream& out, std::size_t path_index,
                                    const BalanceSheetPath& bs, bool header) {
  if (header) out << "path,year,A,L,E\n";
  out.precision(17);
  for (std::size_t t = 0; t < bs.A.size(); ++t) {
    out << path_index << ',' << t << ',' << bs.A[t] << ',' << bs.L[t] << ',' << bs.E[t] << '\n';
  }
}

}  // namespace alm
