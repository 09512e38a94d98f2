#pragma once

// Market and inflation scenario generation on an annual grid.
//
// Short rate r follows a CIR diffusion discretized with the Milstein scheme
// (full truncation), the risky asset X a geometric Brownian motion sampled
// exactly, and the inflation driver x an Ornstein-Uhlenbeck process sampled
// with its exact Gaussian transition. The cash account Y and the price index
// ratio I_t/I_0 are integrals of r and (j + x) over a sub-step grid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "alm/errors.hpp"
#include "alm/parallel.hpp"
#include "alm/rng.hpp"

namespace alm {

struct MarketParams {
  double mu = 0.0;       // drift of X, per year
  double sigma_x = 0.0;  // volatility of X
  double r0 = 0.0;
  double r_inf = 0.0;  // long-run short rate
  double a_r = 0.0;    // CIR reversion speed
  double sigma_r = 0.0;
  double rho = 0.0;  // correlation of the r and X Brownians
  double i = 0.0;    // technical discount rate

  /// Reference asset parameters used by the default study.
  static MarketParams reference() {
    return {.mu = std::log(1.07),
            .sigma_x = 0.25,
            .r0 = std::log(1.03),
            .r_inf = std::log(1.0462),
            .a_r = 0.5,
            .sigma_r = 0.02,
            .rho = -0.1,
            .i = 0.025};
  }
};

struct InflationParams {
  double j = 0.0;    // mean instantaneous inflation rate
  double a_i = 1.0;  // OU reversion speed
  double sigma_i = 0.0;
  double x0 = 0.0;  // initial OU state

  static InflationParams reference() {
    return {.j = 0.0279, .a_i = 0.7369, .sigma_i = 0.0056, .x0 = 0.0};
  }
};

/// Throws ValidationError on a hard invariant violation; returns warnings for
/// soft ones (the rate ordering, and the literal a_r >= sigma_r^2/2 form of
/// the positivity condition).
inline std::vector<std::string> validate(const MarketParams& p) {
  auto finite = [](double v) { return std::isfinite(v); };
  const std::pair<const char*, double> fields[] = {
      {"mu", p.mu},   {"sigma_x", p.sigma_x}, {"r0", p.r0},   {"r_inf", p.r_inf},
      {"a_r", p.a_r}, {"sigma_r", p.sigma_r}, {"rho", p.rho}, {"i", p.i}};
  for (const auto& [name, v] : fields) {
    if (!finite(v)) throw ValidationError(name, "must be finite");
  }
  if (p.sigma_x < 0.0) throw ValidationError("sigma_x", "must be >= 0");
  if (p.sigma_r < 0.0) throw ValidationError("sigma_r", "must be >= 0");
  if (p.a_r < 0.0) throw ValidationError("a_r", "must be >= 0");
  if (p.r0 < 0.0) throw ValidationError("r0", "must be >= 0");
  if (p.r_inf < 0.0) throw ValidationError("r_inf", "must be >= 0");
  if (p.rho < -1.0 || p.rho > 1.0) throw ValidationError("rho", "must lie in [-1, 1]");
  if (p.i <= -1.0) throw ValidationError("i", "must be > -1");
  if (2.0 * p.a_r * p.r_inf < p.sigma_r * p.sigma_r) {
    throw ValidationError("sigma_r", "positivity condition 2*a_r*r_inf >= sigma_r^2 violated");
  }

  std::vector<std::string> warnings;
  if (p.a_r < 0.5 * p.sigma_r * p.sigma_r) {
    warnings.emplace_back("a_r < sigma_r^2/2 (literal positivity inequality fails)");
  }
  if (!(p.mu >= p.r_inf && p.r_inf >= std::log1p(p.i) && std::log1p(p.i) >= 0.0)) {
    warnings.emplace_back("rate ordering mu >= r_inf >= ln(1+i) >= 0 does not hold");
  }
  return warnings;
}

inline void validate(const InflationParams& p) {
  if (!std::isfinite(p.j)) throw ValidationError("j", "must be finite");
  if (!std::isfinite(p.x0)) throw ValidationError("x0", "must be finite");
  if (!(p.a_i > 0.0) || !std::isfinite(p.a_i)) throw ValidationError("a_i", "must be > 0");
  if (!(p.sigma_i >= 0.0) || !std::isfinite(p.sigma_i)) {
    throw ValidationError("sigma_i", "must be >= 0");
  }
}

// ---------------------------------------------------------------------------
// Single-step kernels

/// Exact GBM transition.
inline double gbm_step(double x, double mu, double sigma_x, double dt, double z) {
  return x * std::exp((mu - 0.5 * sigma_x * sigma_x) * dt + sigma_x * std::sqrt(dt) * z);
}

/// Milstein step for CIR with full truncation: the rate is floored at 0 inside
/// drift and diffusion, and the result is floored at 0.
inline double cir_step_milstein(double r, double a_r, double r_inf, double sigma_r, double dt,
                                double z) {
  const double r_pos = std::max(r, 0.0);
  const double next = r + a_r * (r_inf - r_pos) * dt + sigma_r * std::sqrt(r_pos * dt) * z +
                      0.25 * sigma_r * sigma_r * (z * z - 1.0) * dt;
  return std::max(next, 0.0);
}

/// Cash account over one year. r_sub holds the rate at the start of each
/// sub-step; the integral of r is the left-point rectangle sum.
inline double cash_account_step(double y, std::span<const double> r_sub) {
  if (r_sub.empty()) return y;
  const double dt = 1.0 / static_cast<double>(r_sub.size());
  double integral = 0.0;
  for (double r : r_sub) integral += r * dt;
  return y * std::exp(integral);
}

/// One correlated pair: z_x = rho*z_r + sqrt(1-rho^2)*z_indep.
inline std::pair<double, double> correlated_normals(RandomStream& stream, double rho) {
  const double z_r = stream.normal();
  const double z_indep = stream.normal();
  return {z_r, rho * z_r + std::sqrt(std::max(0.0, 1.0 - rho * rho)) * z_indep};
}

/// Exact OU transition for dx = -a x ds + sigma dB.
inline double ou_step(double x, double a_i, double sigma_i, double dt, double z) {
  const double decay = std::exp(-a_i * dt);
  const double sd = sigma_i * std::sqrt(-std::expm1(-2.0 * a_i * dt) / (2.0 * a_i));
  return x * decay + sd * z;
}

/// Conditional mean of the integral of x over [t, t+delta] given x_t.
inline double integrated_ou_mean(double x_t, double a_i, double delta) {
  return x_t * (-std::expm1(-a_i * delta)) / a_i;
}

/// Conditional variance of the integral of x over [t, t+delta].
inline double integrated_ou_variance(double a_i, double sigma_i, double delta) {
  const double g = -std::expm1(-a_i * delta);
  return sigma_i * sigma_i / (a_i * a_i) * (delta - g / a_i - g * g / (2.0 * a_i));
}

/// E[I_{t+delta} / I_t | x_t] in closed form (log-normal Laplace transform of
/// the integrated OU driver).
inline double inflation_factor(double x_t, const InflationParams& infl, double delta) {
  if (!(delta > 0.0)) throw InputError("inflation_factor: delta must be > 0");
  return std::exp(infl.j * delta + integrated_ou_mean(x_t, infl.a_i, delta) +
                  0.5 * integrated_ou_variance(infl.a_i, infl.sigma_i, delta));
}

/// Price index ratio over one year. x_sub holds the OU state on the sub-step
/// grid including both end points (size sub_steps + 1); the integral of x is
/// taken with the trapezoid rule.
inline double realized_inflation_step(double i_ratio, std::span<const double> x_sub, double j) {
  if (x_sub.size() < 2) return i_ratio * std::exp(j);
  const double dt = 1.0 / static_cast<double>(x_sub.size() - 1);
  double integral = 0.5 * (x_sub.front() + x_sub.back());
  for (std::size_t k = 1; k + 1 < x_sub.size(); ++k) integral += x_sub[k];
  return i_ratio * std::exp(j + integral * dt);
}

// ---------------------------------------------------------------------------
// Scenario sets

/// Annual series of one path, each of length horizon + 1 (index 0 is t = 0).
struct PathView {
  std::span<const double> X, Y, r, x, I;
};

/// Joint paths stored row-major, one row of horizon + 1 points per path.
struct ScenarioSet {
  std::size_t n_paths = 0;
  std::size_t horizon = 0;
  std::size_t sub_steps = 0;
  std::uint64_t seed = 0;
  bool has_inflation = false;
  std::vector<double> X, Y, r, x, I;

  std::size_t stride() const { return horizon + 1; }

  PathView path(std::size_t n) const {
    const std::size_t s = stride();
    const std::size_t off = n * s;
    return {{X.data() + off, s}, {Y.data() + off, s}, {r.data() + off, s},
            {x.data() + off, s}, {I.data() + off, s}};
  }
};

namespace detail {

inline void simulate_market_path(const MarketParams& m, std::size_t horizon,
                                 std::size_t sub_steps, RandomStream& stream,
                                 std::span<double> X, std::span<double> Y,
                                 std::span<double> r) {
  const double dt = 1.0 / static_cast<double>(sub_steps);
  std::vector<double> r_sub(sub_steps);
  X[0] = 1.0;
  Y[0] = 1.0;
  r[0] = m.r0;
  double x_now = 1.0;
  double r_now = m.r0;
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t k = 0; k < sub_steps; ++k) {
      const auto [z_r, z_x] = correlated_normals(stream, m.rho);
      r_sub[k] = r_now;
      x_now = gbm_step(x_now, m.mu, m.sigma_x, dt, z_x);
      r_now = cir_step_milstein(r_now, m.a_r, m.r_inf, m.sigma_r, dt, z_r);
    }
    X[t + 1] = x_now;
    Y[t + 1] = cash_account_step(Y[t], r_sub);
    r[t + 1] = r_now;
  }
}

inline void simulate_inflation_path(const InflationParams& infl, std::size_t horizon,
                                    std::size_t sub_steps, RandomStream& stream,
                                    std::span<double> x, std::span<double> I) {
  const double dt = 1.0 / static_cast<double>(sub_steps);
  std::vector<double> x_sub(sub_steps + 1);
  x[0] = infl.x0;
  I[0] = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    x_sub[0] = x[t];
    for (std::size_t k = 0; k < sub_steps; ++k) {
      x_sub[k + 1] = ou_step(x_sub[k], infl.a_i, infl.sigma_i, dt, stream.normal());
    }
    x[t + 1] = x_sub.back();
    I[t + 1] = realized_inflation_step(I[t], x_sub, infl.j);
  }
}

}  // namespace detail

/// Generates n_paths joint paths. Path n draws from its own sub-streams
/// (seed, market, n) and (seed, inflation, n); the inflation driver is
/// independent of the market Brownians. Output does not depend on workers.
inline ScenarioSet generate_scenarios(const MarketParams& market,
                                      const std::optional<InflationParams>& infl,
                                      std::size_t n_paths, std::size_t horizon,
                                      std::size_t sub_steps, std::uint64_t seed,
                                      unsigned workers = 0) {
  if (n_paths < 1) throw ValidationError("n_paths", "must be >= 1");
  if (horizon < 1) throw ValidationError("horizon", "must be >= 1");
  if (sub_steps < 1) throw ValidationError("sub_steps", "must be >= 1");
  validate(market);
  if (infl) validate(*infl);

  ScenarioSet set;
  set.n_paths = n_paths;
  set.horizon = horizon;
  set.sub_steps = sub_steps;
  set.seed = seed;
  set.has_inflation = infl.has_value();
  const std::size_t total = n_paths * (horizon + 1);
  set.X.resize(total);
  set.Y.resize(total);
  set.r.resize(total);
  set.x.assign(total, 0.0);
  set.I.assign(total, 1.0);

  const std::size_t s = set.stride();
  parallel_for(n_paths, workers, [&](std::size_t n) {
    const std::size_t off = n * s;
    RandomStream market_stream(seed, StreamDomain::market, n);
    detail::simulate_market_path(market, horizon, sub_steps, market_stream,
                                 {set.X.data() + off, s}, {set.Y.data() + off, s},
                                 {set.r.data() + off, s});
    if (infl) {
      RandomStream infl_stream(seed, StreamDomain::inflation, n);
      detail::simulate_inflation_path(*infl, horizon, sub_steps, infl_stream,
                                      {set.x.data() + off, s}, {set.I.data() + off, s});
    }
  });
  return set;
}

/// Audit dump: one row per (path, year).
inline void write_paths_csv(std::ostream& out, const ScenarioSet& set) {
  out << "path,year,X,Y,r,x,I_ratio\n";
  out.precision(17);
  for (std::size_t n = 0; n < set.n_paths; ++n) {
    const PathView p = set.path(n);
    for (std::size_t t = 0; t <= set.horizon; ++t) {
      out << n << ',' << t << ',' << p.X[t] << ',' << p.Y[t] << ',' << p.r[t] << ',' << p.x[t]
          << ',' << p.I[t] << '\n';
    }
  }
}

}  // namespace alm
