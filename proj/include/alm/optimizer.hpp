#pragma once

// Grid solutions of the two allocation programs: the largest risky share
// whose ruin probability stays under a cap, and the risky share minimizing
// the expected economic reserve E[Lambda_theta]. Plus one-parameter
// sensitivity sweeps of the latter.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "alm/balance_sheet.hpp"
#include "alm/errors.hpp"
#include "alm/estimators.hpp"
#include "alm/market.hpp"

namespace alm {

enum class Criterion { ruin_cap, mfpe };

inline const char* to_string(Criterion c) { return c == Criterion::ruin_cap ? "ruin_cap" : "mfpe"; }

struct AllocationResult {
  Criterion criterion = Criterion::mfpe;
  double theta_star = 0.0;
  double objective_at_star = 0.0;  // ruin probability or lambda_mean
  double objective_std_error = 0.0;
  double ruin_prob_at_star = std::numeric_limits<double>::quiet_NaN();
  double ruin_se_at_star = std::numeric_limits<double>::quiet_NaN();
  double grid_step = 0.0;
  bool feasible = true;   // ruin_cap only: some grid point met the cap
  bool boundary = false;  // theta_star at an end of the grid
  bool flat = false;      // objective constant over the grid
};

namespace detail {

template <typename Estimate>
std::vector<std::size_t> theta_order(std::span<const Estimate> grid) {
  std::vector<std::size_t> order(grid.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return grid[a].theta < grid[b].theta; });
  return order;
}

template <typename Estimate>
double grid_step(std::span<const Estimate> grid, const std::vector<std::size_t>& order) {
  double step = 0.0;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const double d = grid[order[k]].theta - grid[order[k - 1]].theta;
    if (d > 0.0 && (step == 0.0 || d < step)) step = d;
  }
  return step;
}

// Objective values within this relative distance count as ties.
inline constexpr double kTieTolerance = 1e-12;

inline bool ties(double a, double b) {
  return std::abs(a - b) <= kTieTolerance * std::max(std::abs(a), std::abs(b));
}

}  // namespace detail

/// Largest grid theta with estimated ruin probability <= pi_max. When no grid
/// point qualifies, returns the minimal-ruin theta with feasible = false.
inline AllocationResult optimize_ruin_cap(std::span<const RuinEstimate> grid, double pi_max) {
  if (grid.empty()) throw InputError("optimize_ruin_cap: empty grid");
  if (!(pi_max >= 0.0 && pi_max <= 1.0)) throw ValidationError("pi_max", "must lie in [0, 1]");
  const auto order = detail::theta_order(grid);

  AllocationResult res;
  res.criterion = Criterion::ruin_cap;
  res.grid_step = detail::grid_step(grid, order);
  std::optional<std::size_t> best;
  for (std::size_t idx : order) {
    if (grid[idx].probability <= pi_max) best = idx;
  }
  if (!best) {
    res.feasible = false;
    std::size_t arg = order.front();
    for (std::size_t idx : order) {
      if (grid[idx].probability < grid[arg].probability) arg = idx;
    }
    best = arg;
  }
  const auto& e = grid[*best];
  res.theta_star = e.theta;
  res.objective_at_star = e.probability;
  res.objective_std_error = e.std_error;
  res.ruin_prob_at_star = e.probability;
  res.ruin_se_at_star = e.std_error;
  res.boundary = *best == order.front() || *best == order.back();
  bool flat = true;
  for (std::size_t idx : order) flat = flat && grid[idx].probability == grid[order.front()].probability;
  res.flat = flat;
  return res;
}

/// Grid theta minimizing lambda_mean; ties (relative 1e-12) go to the smaller
/// theta.
inline AllocationResult optimize_mfpe(std::span<const EconomicReserveEstimate> grid) {
  if (grid.empty()) throw InputError("optimize_mfpe: empty grid");
  const auto order = detail::theta_order(grid);

  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& e : grid) {
    lo = std::min(lo, e.lambda_mean);
    hi = std::max(hi, e.lambda_mean);
  }
  std::size_t best = order.front();
  for (std::size_t idx : order) {
    if (detail::ties(grid[idx].lambda_mean, lo)) {
      best = idx;
      break;
    }
  }

  AllocationResult res;
  res.criterion = Criterion::mfpe;
  res.grid_step = detail::grid_step(grid, order);
  res.theta_star = grid[best].theta;
  res.objective_at_star = grid[best].lambda_mean;
  res.objective_std_error = grid[best].lambda_std_error;
  res.boundary = best == order.front() || best == order.back();
  res.flat = detail::ties(lo, hi);
  return res;
}

/// Attaches the ruin estimate at theta_star.
inline void attach_ruin(AllocationResult& res, const RuinEstimate& ruin) {
  res.ruin_prob_at_star = ruin.probability;
  res.ruin_se_at_star = ruin.std_error;
}

/// Evenly spaced grid on [lo, hi] with the given step; hi is included when it
/// falls on the grid (within rounding).
inline std::vector<double> theta_grid(double step, double lo = 0.0, double hi = 1.0) {
  if (!(step > 0.0)) throw ValidationError("theta_step", "must be > 0");
  if (!(lo >= 0.0 && hi <= 1.0 && lo <= hi)) throw ValidationError("theta_range", "invalid");
  const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
  std::vector<double> out(n + 1);
  for (std::size_t k = 0; k <= n; ++k) out[k] = std::min(hi, lo + static_cast<double>(k) * step);
  return out;
}

enum class SweepParameter { mu, sigma_x };

inline const char* to_string(SweepParameter p) { return p == SweepParameter::mu ? "mu" : "sigma_x"; }

struct SweepRow {
  double value = 0.0;
  AllocationResult result;
};

struct SweepSetup {
  MarketParams market;
  std::optional<InflationParams> inflation;
  RunConfig config;
  std::size_t n_paths = 10000;
  std::size_t sub_steps = 12;
  std::uint64_t seed = 0;
  std::vector<double> thetas;
  unsigned workers = 0;
};

/// For each value of the swept parameter, regenerates the scenarios from the
/// master seed (so every point sees the same underlying normals), re-solves
/// the MFPE program and reports the ruin probability at the optimum.
inline std::vector<SweepRow> sensitivity_sweep(const SweepSetup& setup, const LiabilityModel& model,
                                               SweepParameter parameter,
                                               std::span<const double> values) {
  std::vector<SweepRow> rows;
  rows.reserve(values.size());
  for (double v : values) {
    MarketParams m = setup.market;
    (parameter == SweepParameter::mu ? m.mu : m.sigma_x) = v;
    const auto scenarios = generate_scenarios(m, setup.inflation, setup.n_paths, model.horizon(),
                                              setup.sub_steps, setup.seed, setup.workers);
    const auto reserves =
        economic_reserve_curve(scenarios, model, setup.config, setup.thetas, nullptr, setup.workers);
    SweepRow row;
    row.value = v;
    row.result = optimize_mfpe(reserves);
    RunConfig at_star = setup.config;
    at_star.theta = row.result.theta_star;
    attach_ruin(row.result, ruin_probability(scenarios, model, at_star, nullptr, setup.workers));
    rows.push_back(row);
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, SweepParameter parameter,
                            const std::vector<SweepRow>& rows) {
  out << "parameter,value,theta_star,lambda_mean,lambda_se,ruin_prob,ruin_se,boundary,flat\n";
  for (const auto& r : rows) {
    out << to_string(parameter) << ',' << format_number(r.value) << ','
        << format_number(r.result.theta_star) << ',' << format_number(r.result.objective_at_star)
        << ',' << format_number(r.result.objective_std_error) << ','
        << format_number(r.result.ruin_prob_at_star) << ','
        << format_number(r.result.ruin_se_at_star) << ',' << (r.result.boundary ? 1 : 0) << ','
        << (r.result.flat ? 1 : 0) << '\n';
  }
}

}  // namespace alm
