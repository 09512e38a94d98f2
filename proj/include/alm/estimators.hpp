#pragma once

// Monte Carlo estimators over a shared scenario set (common random numbers
// across theta): ruin probabilities, the economic reserve E[Lambda_theta] and
// the financial / mortality split of Var[Lambda_theta].
//
// Reductions run over fixed blocks of market paths and combine block results
// in block order, so every estimate is bit-identical for any worker count.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alm/balance_sheet.hpp"
#include "alm/errors.hpp"
#include "alm/market.hpp"
#include "alm/mortality.hpp"
#include "alm/parallel.hpp"
#include "alm/rng.hpp"

namespace alm {

inline constexpr std::size_t kReductionBlock = 64;

struct RuinEstimate {
  double theta = 0.0;
  double probability = 0.0;
  double std_error = 0.0;
  double mean_ruin_year = std::numeric_limits<double>::quiet_NaN();  // over ruined samples
  double mean_ruin_magnitude = 0.0;                                  // over ruined samples
  double economic_ruin_probability = 0.0;
  std::size_t samples = 0;
};

struct EconomicReserveEstimate {
  double theta = 0.0;
  double lambda_mean = 0.0;
  double lambda_std_error = 0.0;
  double initial_equity = 0.0;   // E_0
  double initial_reserve = 0.0;  // L_0
  double economic_equity = 0.0;  // E_0 + L_0 - lambda_mean
};

struct VarianceDecomposition {
  double theta = 0.0;
  double lambda_mean = 0.0;
  double lambda_std_error = 0.0;     // crossed-design standard error of lambda_mean
  double total_variance = 0.0;       // pooled sample variance of all N*M values
  double financial_component = 0.0;  // estimate of V[E(Lambda | X, Y)]
  double mortality_component = 0.0;  // estimate of E[V(Lambda | X, Y)]
  double financial_share = 0.0;
};

/// M simulated mortality paths, path m drawn from sub-stream (seed, mortality, m).
inline std::vector<MortalityPath> simulate_mortality_paths(const AnnuityPortfolio& portfolio,
                                                           const MortalityTable& table,
                                                           std::size_t m_paths,
                                                           std::uint64_t seed,
                                                           unsigned workers = 0) {
  std::vector<MortalityPath> out(m_paths);
  parallel_for(m_paths, workers, [&](std::size_t m) {
    RandomStream stream(seed, StreamDomain::mortality, m);
    out[m] = simulate_lifetimes(portfolio, table, stream);
  });
  return out;
}

namespace detail {

inline void check_theta_grid(std::span<const double> thetas) {
  if (thetas.empty()) throw InputError("empty theta grid");
  for (double t : thetas) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("theta", "grid values must lie in [0, 1]");
  }
}

inline void check_scenarios(const ScenarioSet& set, const LiabilityModel& model,
                            const RunConfig& cfg) {
  if (set.horizon < model.horizon()) {
    throw InputError("scenario horizon " + std::to_string(set.horizon) +
                     " shorter than liability horizon " + std::to_string(model.horizon()));
  }
  if (cfg.indexation && !set.has_inflation) {
    throw InputError("indexation requested but scenarios carry no inflation driver");
  }
}

/// Runs fn(g, b) over theta index g and path block b, then folds block
/// results per theta in block order.
template <typename Acc, typename Fn>
std::vector<Acc> blocked_theta_reduce(std::size_t n_theta, std::size_t n_paths, unsigned workers,
                                      Fn&& fn) {
  const std::size_t blocks = (n_paths + kReductionBlock - 1) / kReductionBlock;
  std::vector<Acc> partial(n_theta * blocks);
  parallel_for(n_theta * blocks, workers, [&](std::size_t task) {
    const std::size_t g = task / blocks;
    const std::size_t b = task % blocks;
    const std::size_t begin = b * kReductionBlock;
    const std::size_t end = std::min(n_paths, begin + kReductionBlock);
    partial[task] = fn(g, begin, end);
  });
  std::vector<Acc> out(n_theta);
  for (std::size_t g = 0; g < n_theta; ++g) {
    for (std::size_t b = 0; b < blocks; ++b) out[g] += partial[g * blocks + b];
  }
  return out;
}

inline void add_columns(std::vector<double>& into, const std::vector<double>& from) {
  if (into.size() < from.size()) into.resize(from.size(), 0.0);
  for (std::size_t m = 0; m < from.size(); ++m) into[m] += from[m];
}

struct RuinAcc {
  double samples = 0.0;
  double ruined = 0.0;
  double economic = 0.0;
  double sum_year = 0.0;
  double sum_magnitude = 0.0;
  double clusters = 0.0;  // market paths
  double sum_q = 0.0;     // per-market-path ruin fraction
  double sum_q2 = 0.0;
  std::vector<double> col_sum;  // ruined count per mortality path

  RuinAcc& operator+=(const RuinAcc& o) {
    samples += o.samples;
    ruined += o.ruined;
    economic += o.economic;
    sum_year += o.sum_year;
    sum_magnitude += o.sum_magnitude;
    clusters += o.clusters;
    sum_q += o.sum_q;
    sum_q2 += o.sum_q2;
    add_columns(col_sum, o.col_sum);
    return *this;
  }
};

struct RuinOutcome {
  bool ruined = false;
  bool economic = false;
  std::size_t year = 0;
  double magnitude = 0.0;
};

inline RuinOutcome ruin_outcome(const PathView& path, const LiabilityTrack& track, double theta,
                                const RunConfig& cfg) {
  RuinOutcome out;
  double worst = 0.0;
  evolve_assets(path, track, theta, cfg.dynamics, initial_assets(track, cfg),
                [&](std::size_t t, double a) {
                  const double e = a - track.reserve[t];
                  if (e < 0.0 && !out.ruined) {
                    out.ruined = true;
                    out.year = t;
                  }
                  if (a <= 0.0) out.economic = true;
                  worst = std::min(worst, e);
                });
  out.magnitude = -worst;
  return out;
}

struct MomentAcc {
  double count = 0.0;
  double sum = 0.0;
  double sum2 = 0.0;  // of per-cluster means
  std::vector<double> col_sum;  // per mortality path

  MomentAcc& operator+=(const MomentAcc& o) {
    count += o.count;
    sum += o.sum;
    sum2 += o.sum2;
    add_columns(col_sum, o.col_sum);
    return *this;
  }
};

inline double sample_std_error(double count, double sum, double sum2) {
  if (count < 2.0) return 0.0;
  const double mean = sum / count;
  const double var = std::max(0.0, (sum2 - count * mean * mean) / (count - 1.0));
  return std::sqrt(var / count);
}

/// Standard error of the grand mean of an N x M crossed table where the M
/// mortality paths are shared by every market path: the variance of row
/// means over N plus the variance of column means over M. Rows alone when
/// M = 1.
inline double crossed_std_error(double rows, double sum, double sum2,
                                const std::vector<double>& col_sum) {
  const double row_se = sample_std_error(rows, sum, sum2);
  const std::size_t m = col_sum.size();
  if (m < 2 || rows < 1.0) return row_se;
  const double mean = sum / rows;
  double ss = 0.0;
  for (double c : col_sum) ss += (c / rows - mean) * (c / rows - mean);
  const double col_var = ss / static_cast<double>(m - 1);
  return std::sqrt(row_se * row_se + col_var / static_cast<double>(m));
}

/// 1 / (theta X_t + (1-theta) Y_t) for t = 0..size-1.
inline void inverse_wealth(const PathView& path, double theta, std::vector<double>& out) {
  for (std::size_t t = 0; t < out.size(); ++t) {
    out[t] = 1.0 / (theta * path.X[t] + (1.0 - theta) * path.Y[t]);
  }
}

/// sum_{t>=1} paid_t * inv_w_t.
inline double discounted_benefits(std::span<const double> paid, std::span<const double> inv_w) {
  double total = 0.0;
  for (std::size_t t = 1; t < paid.size(); ++t) total += paid[t] * inv_w[t];
  return total;
}

/// sum_t paid_t / (theta X_t + (1-theta) Y_t).
inline double discounted_benefits(const PathView& path, std::span<const double> paid,
                                  double theta) {
  std::vector<double> inv_w(paid.size());
  inverse_wealth(path, theta, inv_w);
  return discounted_benefits(paid, inv_w);
}

/// Benefits actually paid along one path (index 0 unused): deterministic or
/// simulated flows, revalued by the realized index ratio when indexed.
inline std::vector<double> paid_flows(const LiabilityModel& model, const PathView& path,
                                      const RunConfig& cfg, const MortalityPath* mortality) {
  const std::size_t horizon = model.horizon();
  std::vector<double> paid(horizon + 1, 0.0);
  if (mortality == nullptr) {
    for (std::size_t t = 1; t <= horizon; ++t) paid[t] = model.expected().at(t);
  } else {
    const auto& annuitants = model.portfolio().annuitants;
    for (std::size_t j = 0; j < annuitants.size(); ++j) {
      const auto last = std::min<std::size_t>(static_cast<std::size_t>((*mortality)[j]), horizon);
      for (std::size_t t = 1; t <= last; ++t) paid[t] += annuitants[j].annuity;
    }
  }
  if (cfg.indexation) {
    for (std::size_t t = 1; t <= horizon; ++t) paid[t] *= path.I[t];
  }
  return paid;
}

}  // namespace detail

/// Ruin probabilities on a theta grid. Deterministic mortality: one sample per
/// market path. Stochastic mortality: every market path crossed with every
/// mortality path (N x M samples); standard errors treat the table as a
/// crossed design since every market path sees the same mortality paths.
inline std::vector<RuinEstimate> ruin_curve(const ScenarioSet& scenarios,
                                            const LiabilityModel& model, const RunConfig& cfg,
                                            std::span<const double> thetas,
                                            const std::vector<MortalityPath>* mortality = nullptr,
                                            unsigned workers = 0) {
  detail::check_theta_grid(thetas);
  detail::check_scenarios(scenarios, model, cfg);
  const bool stochastic = cfg.mortality_mode == MortalityMode::stochastic;
  if (stochastic && (mortality == nullptr || mortality->empty())) {
    throw InputError("stochastic ruin estimate needs at least one mortality path");
  }
  const std::size_t n_paths = scenarios.n_paths;
  const std::size_t m_paths = stochastic ? mortality->size() : 1;

  // Liability tracks that do not depend on the market path are built once.
  std::vector<LiabilityTrack> shared;
  if (!cfg.indexation) {
    const PathView first = scenarios.path(0);
    if (stochastic) {
      shared.resize(m_paths);
      parallel_for(m_paths, workers, [&](std::size_t m) {
        shared[m] = liability_track(model, first, cfg, &(*mortality)[m]);
      });
    } else {
      shared.push_back(liability_track(model, first, cfg));
    }
  }
  std::vector<LiabilityTrack> per_path;
  if (cfg.indexation && !stochastic) {
    per_path.resize(n_paths);
    parallel_for(n_paths, workers, [&](std::size_t n) {
      per_path[n] = liability_track(model, scenarios.path(n), cfg);
    });
  }

  auto accs = detail::blocked_theta_reduce<detail::RuinAcc>(
      thetas.size(), n_paths, workers, [&](std::size_t g, std::size_t begin, std::size_t end) {
        detail::RuinAcc acc;
        if (stochastic) acc.col_sum.assign(m_paths, 0.0);
        for (std::size_t n = begin; n < end; ++n) {
          const PathView path = scenarios.path(n);
          double ruined_here = 0.0;
          for (std::size_t m = 0; m < m_paths; ++m) {
            const LiabilityTrack* track = nullptr;
            LiabilityTrack local;
            if (!cfg.indexation) {
              track = &shared[stochastic ? m : 0];
            } else if (!stochastic) {
              track = &per_path[n];
            } else {
              local = liability_track(model, path, cfg, &(*mortality)[m]);
              track = &local;
            }
            const auto o = detail::ruin_outcome(path, *track, thetas[g], cfg);
            acc.samples += 1.0;
            if (o.ruined) {
              acc.ruined += 1.0;
              ruined_here += 1.0;
              if (stochastic) acc.col_sum[m] += 1.0;
              acc.sum_year += static_cast<double>(o.year);
              acc.sum_magnitude += o.magnitude;
            }
            if (o.economic) acc.economic += 1.0;
          }
          const double q = ruined_here / static_cast<double>(m_paths);
          acc.clusters += 1.0;
          acc.sum_q += q;
          acc.sum_q2 += q * q;
        }
        return acc;
      });

  std::vector<RuinEstimate> out(thetas.size());
  for (std::size_t g = 0; g < thetas.size(); ++g) {
    const auto& a = accs[g];
    RuinEstimate& r = out[g];
    r.theta = thetas[g];
    r.samples = static_cast<std::size_t>(a.samples);
    r.probability = a.ruined / a.samples;
    r.economic_ruin_probability = a.economic / a.samples;
    r.std_error = detail::crossed_std_error(a.clusters, a.sum_q, a.sum_q2, a.col_sum);
    if (a.ruined > 0.0) {
      r.mean_ruin_year = a.sum_year / a.ruined;
      r.mean_ruin_magnitude = a.sum_magnitude / a.ruined;
    }
  }
  return out;
}

/// Ruin estimate for a single theta.
inline RuinEstimate ruin_probability(const ScenarioSet& scenarios, const LiabilityModel& model,
                                     const RunConfig& cfg,
                                     const std::vector<MortalityPath>* mortality = nullptr,
                                     unsigned workers = 0) {
  const double theta[] = {cfg.theta};
  return ruin_curve(scenarios, model, cfg, theta, mortality, workers).front();
}

/// Estimates of E[Lambda_theta] on a theta grid. With mortality paths the
/// flows are the simulated ones (N x M average, clustered standard error);
/// otherwise the expected flows.
inline std::vector<EconomicReserveEstimate> economic_reserve_curve(
    const ScenarioSet& scenarios, const LiabilityModel& model, const RunConfig& cfg,
    std::span<const double> thetas, const std::vector<MortalityPath>* mortality = nullptr,
    unsigned workers = 0) {
  detail::check_theta_grid(thetas);
  detail::check_scenarios(scenarios, model, cfg);
  const bool stochastic = mortality != nullptr;
  if (stochastic && mortality->empty()) throw InputError("empty mortality path set");
  const std::size_t n_paths = scenarios.n_paths;
  const std::size_t m_paths = stochastic ? mortality->size() : 1;

  // Paid flows are theta-independent; without indexation they do not depend
  // on the market path either.
  std::vector<std::vector<double>> shared_paid;
  if (!cfg.indexation) {
    shared_paid.resize(m_paths);
    for (std::size_t m = 0; m < m_paths; ++m) {
      shared_paid[m] = detail::paid_flows(model, scenarios.path(0), cfg,
                                          stochastic ? &(*mortality)[m] : nullptr);
    }
  }

  auto accs = detail::blocked_theta_reduce<detail::MomentAcc>(
      thetas.size(), n_paths, workers, [&](std::size_t g, std::size_t begin, std::size_t end) {
        detail::MomentAcc acc;
        if (stochastic) acc.col_sum.assign(m_paths, 0.0);
        std::vector<double> local;
        std::vector<double> inv_w(model.horizon() + 1);
        for (std::size_t n = begin; n < end; ++n) {
          const PathView path = scenarios.path(n);
          detail::inverse_wealth(path, thetas[g], inv_w);
          double sum = 0.0;
          for (std::size_t m = 0; m < m_paths; ++m) {
            const std::vector<double>* paid = nullptr;
            if (cfg.indexation) {
              local = detail::paid_flows(model, path, cfg, stochastic ? &(*mortality)[m] : nullptr);
              paid = &local;
            } else {
              paid = &shared_paid[m];
            }
            const double lambda = detail::discounted_benefits(*paid, inv_w);
            sum += lambda;
            if (stochastic) acc.col_sum[m] += lambda;
          }
          const double cluster_mean = sum / static_cast<double>(m_paths);
          acc.count += 1.0;
          acc.sum += cluster_mean;
          acc.sum2 += cluster_mean * cluster_mean;
        }
        return acc;
      });

  const double l0 = cfg.indexation ? model.indexed_reserve0() : model.reserve0();
  const double e0 = cfg.e0_ratio * l0;
  std::vector<EconomicReserveEstimate> out(thetas.size());
  for (std::size_t g = 0; g < thetas.size(); ++g) {
    auto& e = out[g];
    e.theta = thetas[g];
    e.lambda_mean = accs[g].sum / accs[g].count;
    e.lambda_std_error =
        detail::crossed_std_error(accs[g].count, accs[g].sum, accs[g].sum2, accs[g].col_sum);
    e.initial_equity = e0;
    e.initial_reserve = l0;
    e.economic_equity = e0 + l0 - e.lambda_mean;
  }
  return out;
}

inline EconomicReserveEstimate economic_reserve(const ScenarioSet& scenarios,
                                                const LiabilityModel& model, const RunConfig& cfg,
                                                const std::vector<MortalityPath>* mortality = nullptr,
                                                unsigned workers = 0) {
  const double theta[] = {cfg.theta};
  return economic_reserve_curve(scenarios, model, cfg, theta, mortality, workers).front();
}

/// Splits the sample variance of an N x M table of lambda values (row n =
/// market path, column m = mortality path) into the within-row term (mean of
/// row variances, unbiased) and the between-row term (variance of row means).
inline VarianceDecomposition decompose_variance(std::span<const double> lambda, std::size_t n,
                                                std::size_t m, double theta = 0.0) {
  if (n < 2 || m < 2) throw InputError("variance decomposition needs N >= 2 and M >= 2");
  if (lambda.size() != n * m) throw InputError("lambda table size does not match N x M");
  std::vector<double> row_mean(n, 0.0);
  double mortality = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = lambda.subspan(r * m, m);
    double s = 0.0;
    for (double v : row) s += v;
    row_mean[r] = s / static_cast<double>(m);
    double ss = 0.0;
    for (double v : row) ss += (v - row_mean[r]) * (v - row_mean[r]);
    mortality += ss / static_cast<double>(m - 1);
  }
  mortality /= static_cast<double>(n);
  double grand = 0.0;
  for (double v : row_mean) grand += v;
  const double row_total = grand;
  grand /= static_cast<double>(n);
  double financial = 0.0;
  for (double v : row_mean) financial += (v - grand) * (v - grand);
  financial /= static_cast<double>(n - 1);
  double total = 0.0;
  for (double v : lambda) total += (v - grand) * (v - grand);
  total /= static_cast<double>(n * m - 1);
  std::vector<double> col_sum(m, 0.0);
  double row_sum2 = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) col_sum[c] += lambda[r * m + c];
    row_sum2 += row_mean[r] * row_mean[r];
  }

  VarianceDecomposition d;
  d.theta = theta;
  d.lambda_mean = grand;
  d.lambda_std_error =
      detail::crossed_std_error(static_cast<double>(n), row_total, row_sum2, col_sum);
  d.total_variance = total;
  d.financial_component = financial;
  d.mortality_component = mortality;
  const double sum = financial + mortality;
  d.financial_share = sum > 0.0 ? financial / sum : 0.0;
  return d;
}

/// Lambda table for N market paths x M mortality paths at one theta.
inline std::vector<double> lambda_table(const ScenarioSet& scenarios, const LiabilityModel& model,
                                        const RunConfig& cfg,
                                        const std::vector<MortalityPath>& mortality,
                                        unsigned workers = 0) {
  detail::check_scenarios(scenarios, model, cfg);
  const std::size_t m_paths = mortality.size();
  std::vector<std::vector<double>> shared(m_paths);
  if (!cfg.indexation) {
    for (std::size_t m = 0; m < m_paths; ++m) {
      shared[m] = detail::paid_flows(model, scenarios.path(0), cfg, &mortality[m]);
    }
  }
  std::vector<double> table(scenarios.n_paths * m_paths);
  parallel_for(scenarios.n_paths, workers, [&](std::size_t n) {
    const PathView path = scenarios.path(n);
    std::vector<double> local;
    std::vector<double> inv_w(model.horizon() + 1);
    detail::inverse_wealth(path, cfg.theta, inv_w);
    for (std::size_t m = 0; m < m_paths; ++m) {
      const std::vector<double>* paid = &shared[m];
      if (cfg.indexation) {
        local = detail::paid_flows(model, path, cfg, &mortality[m]);
        paid = &local;
      }
      table[n * m_paths + m] = detail::discounted_benefits(*paid, inv_w);
    }
  });
  return table;
}

/// Financial / mortality decomposition of Var[Lambda_theta] at cfg.theta.
inline VarianceDecomposition variance_decomposition(const ScenarioSet& scenarios,
                                                    const LiabilityModel& model,
                                                    const RunConfig& cfg,
                                                    const std::vector<MortalityPath>& mortality,
                                                    unsigned workers = 0) {
  if (scenarios.n_paths < 2 || mortality.size() < 2) {
    throw InputError("variance decomposition needs N >= 2 market and M >= 2 mortality paths");
  }
  const auto table = lambda_table(scenarios, model, cfg, mortality, workers);
  return decompose_variance(table, scenarios.n_paths, mortality.size(), cfg.theta);
}

struct MutualizationResult {
  std::size_t k = 1;
  VarianceDecomposition base;
  VarianceDecomposition replicated;
};

/// Same market paths, base portfolio vs k-fold replicated portfolio (each
/// copy with independent lifetimes). Mortality path m of both portfolios is
/// drawn from sub-stream (seed, mortality, m).
inline MutualizationResult mutualization_study(const LiabilityModel& base, std::size_t k,
                                               const ScenarioSet& scenarios, std::size_t m_paths,
                                               std::uint64_t seed, const RunConfig& cfg,
                                               unsigned workers = 0) {
  if (k < 1) throw ValidationError("k_replication", "must be >= 1");
  MutualizationResult out;
  out.k = k;
  const auto base_paths =
      simulate_mortality_paths(base.portfolio(), base.table(), m_paths, seed, workers);
  out.base = variance_decomposition(scenarios, base, cfg, base_paths, workers);
  if (k == 1) {
    out.replicated = out.base;
    return out;
  }
  const LiabilityModel big(base.portfolio().replicated(k), base.table(), base.rate(),
                           base.inflation());
  const auto big_paths =
      simulate_mortality_paths(big.portfolio(), big.table(), m_paths, seed, workers);
  out.replicated = variance_decomposition(scenarios, big, cfg, big_paths, workers);
  return out;
}

// ---------------------------------------------------------------------------
// Results table

/// One row of the results table; absent statistics are written as "nan".
struct ResultRow {
  double theta = 0.0;
  std::optional<RuinEstimate> ruin;
  std::optional<EconomicReserveEstimate> reserve;
  std::optional<VarianceDecomposition> variance;
};

inline constexpr const char* kResultsHeader =
    "theta,ruin_prob,ruin_se,lambda_mean,lambda_se,fin_var,mort_var,fin_share";

inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows,
                              bool header = true, const std::string& prefix_header = {},
                              const std::string& prefix_value = {}) {
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  if (header) out << prefix_header << kResultsHeader << '\n';
  for (const auto& row : rows) {
    out << prefix_value << format_number(row.theta) << ','
        << format_number(row.ruin ? row.ruin->probability : nan) << ','
        << format_number(row.ruin ? row.ruin->std_error : nan) << ','
        << format_number(row.reserve ? row.reserve->lambda_mean : nan) << ','
        << format_number(row.reserve ? row.reserve->lambda_std_error : nan) << ','
        << format_number(row.variance ? row.variance->financial_component : nan) << ','
        << format_number(row.variance ? row.variance->mortality_component : nan) << ','
        << format_number(row.variance ? row.variance->financial_share : nan) << '\n';
  }
}

}  // namespace alm
