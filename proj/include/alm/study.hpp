#pragma once

// Study configuration and the runner that turns a config into output files.
//
// Config files are flat `key = value` text, one entry per line, `#` starts a
// comment. Unknown keys are rejected. See configs/reference.cfg for every key.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "alm/balance_sheet.hpp"
#include "alm/errors.hpp"
#include "alm/estimators.hpp"
#include "alm/io.hpp"
#include "alm/market.hpp"
#include "alm/mortality.hpp"
#include "alm/optimizer.hpp"

namespace alm {

inline constexpr const char* kVersion = "1.0.0";

enum class StudyKind {
  ruin_curve,
  mfpe_curve,
  variance_decomp,
  mutualization,
  indexed_ruin_curve,
  indexed_mfpe,
  sensitivity,
};

inline const char* to_string(StudyKind k) {
  switch (k) {
    case StudyKind::ruin_curve: return "ruin_curve";
    case StudyKind::mfpe_curve: return "mfpe_curve";
    case StudyKind::variance_decomp: return "variance_decomp";
    case StudyKind::mutualization: return "mutualization";
    case StudyKind::indexed_ruin_curve: return "indexed_ruin_curve";
    case StudyKind::indexed_mfpe: return "indexed_mfpe";
    case StudyKind::sensitivity: return "sensitivity";
  }
  return "?";
}

struct StudyConfig {
  std::string portfolio_file;  // empty: synthetic portfolio
  std::string mortality_file;  // empty: synthetic Makeham table
  std::size_t synthetic_size = 374;
  std::uint64_t synthetic_seed = 20031231;

  MarketParams market = MarketParams::reference();
  std::optional<InflationParams> inflation;

  RunConfig run{.theta = 0.164};
  std::size_t n_paths = 10000;
  std::size_t m_mortality_paths = 100;
  std::size_t sub_steps = 12;
  double theta_step = 0.0005;
  double theta_min = 0.0;
  double theta_max = 1.0;
  std::uint64_t seed = 1;
  double pi_max = 0.01;
  StudyKind study = StudyKind::mfpe_curve;
  std::string output_dir = "out";
  unsigned workers = 0;  // 0: hardware concurrency; never changes results
  std::size_t k_replication = 10;
  SweepParameter sweep_parameter = SweepParameter::mu;
  std::vector<double> sweep_values;
  std::size_t dump_paths = 0;  // audit dumps of the first paths

  bool operator==(const StudyConfig& o) const {
    auto same_market = [](const MarketParams& a, const MarketParams& b) {
      return a.mu == b.mu && a.sigma_x == b.sigma_x && a.r0 == b.r0 && a.r_inf == b.r_inf &&
             a.a_r == b.a_r && a.sigma_r == b.sigma_r && a.rho == b.rho && a.i == b.i;
    };
    auto same_infl = [](const std::optional<InflationParams>& a,
                        const std::optional<InflationParams>& b) {
      if (a.has_value() != b.has_value()) return false;
      return !a || (a->j == b->j && a->a_i == b->a_i && a->sigma_i == b->sigma_i && a->x0 == b->x0);
    };
    return portfolio_file == o.portfolio_file && mortality_file == o.mortality_file &&
           synthetic_size == o.synthetic_size && synthetic_seed == o.synthetic_seed &&
           same_market(market, o.market) && same_infl(inflation, o.inflation) &&
           run.theta == o.run.theta && run.e0_ratio == o.run.e0_ratio &&
           run.dynamics == o.run.dynamics && run.indexation == o.run.indexation &&
           run.mortality_mode == o.run.mortality_mode && n_paths == o.n_paths &&
           m_mortality_paths == o.m_mortality_paths && sub_steps == o.sub_steps &&
           theta_step == o.theta_step && theta_min == o.theta_min && theta_max == o.theta_max &&
           seed == o.seed && pi_max == o.pi_max && study == o.study &&
           output_dir == o.output_dir && workers == o.workers &&
           k_replication == o.k_replication && sweep_parameter == o.sweep_parameter &&
           sweep_values == o.sweep_values && dump_paths == o.dump_paths;
  }
};

namespace detail {

inline std::string trim_copy(std::string_view s) { return std::string(trim(s)); }

template <typename Int>
Int parse_unsigned(std::string_view text, const std::string& key) {
  Int v{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw ValidationError(key, "expected a non-negative integer, got '" + std::string(text) + "'");
  }
  return v;
}

inline bool parse_bool(std::string_view text, const std::string& key) {
  if (text == "on" || text == "true" || text == "1") return true;
  if (text == "off" || text == "false" || text == "0") return false;
  throw ValidationError(key, "expected on/off");
}

inline StudyKind parse_study(std::string_view text) {
  for (auto k : {StudyKind::ruin_curve, StudyKind::mfpe_curve, StudyKind::variance_decomp,
                 StudyKind::mutualization, StudyKind::indexed_ruin_curve, StudyKind::indexed_mfpe,
                 StudyKind::sensitivity}) {
    if (text == to_string(k)) return k;
  }
  throw ValidationError("study", "unknown study '" + std::string(text) + "'");
}

}  // namespace detail

/// Checks cross-field invariants. Throws ValidationError naming the field.
inline std::vector<std::string> validate(const StudyConfig& c) {
  auto warnings = validate(c.market);
  if (c.inflation) validate(*c.inflation);
  validate(c.run);
  if (c.n_paths < 1) throw ValidationError("n_paths", "must be >= 1");
  if (c.sub_steps < 1) throw ValidationError("sub_steps", "must be >= 1");
  if (!(c.theta_step > 0.0)) throw ValidationError("theta_step", "must be > 0");
  if (!(c.theta_min >= 0.0 && c.theta_min <= c.theta_max && c.theta_max <= 1.0)) {
    throw ValidationError("theta_min", "need 0 <= theta_min <= theta_max <= 1");
  }
  if (!(c.pi_max >= 0.0 && c.pi_max <= 1.0)) throw ValidationError("pi_max", "must lie in [0, 1]");
  const bool indexed_study =
      c.study == StudyKind::indexed_ruin_curve || c.study == StudyKind::indexed_mfpe;
  if ((indexed_study || c.run.indexation) && !c.inflation) {
    throw ValidationError("inflation", std::string("study ") + to_string(c.study) +
                                           " with indexation needs j, a_i and sigma_i");
  }
  const bool needs_mortality = c.study == StudyKind::variance_decomp ||
                               c.study == StudyKind::mutualization ||
                               c.run.mortality_mode == MortalityMode::stochastic;
  if (needs_mortality && c.m_mortality_paths < 2) {
    throw ValidationError("m_mortality_paths", "must be >= 2 for this study");
  }
  if ((c.study == StudyKind::variance_decomp || c.study == StudyKind::mutualization) &&
      c.n_paths < 2) {
    throw ValidationError("n_paths", "must be >= 2 for this study");
  }
  if (c.study == StudyKind::mutualization && c.k_replication < 1) {
    throw ValidationError("k_replication", "must be >= 1");
  }
  if (c.study == StudyKind::sensitivity && c.sweep_values.empty()) {
    throw ValidationError("sweep_values", "sensitivity study needs at least one value");
  }
  if (c.portfolio_file.empty() && c.synthetic_size == 0) {
    throw ValidationError("synthetic_size", "must be > 0");
  }
  return warnings;
}

/// Parses a config. Errors carry the line number; invariant violations the
/// field name.
inline StudyConfig load_config(std::istream& in) {
  StudyConfig c;
  std::optional<double> j, a_i, sigma_i, x0;
  std::map<std::string, std::size_t> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    const std::string at = "line " + std::to_string(line_no);
    if (eq == std::string_view::npos) throw InputError(at + ": expected 'key = value'");
    const std::string key = detail::trim_copy(view.substr(0, eq));
    const std::string_view value = detail::trim(view.substr(eq + 1));
    if (seen.count(key)) throw InputError(at + ": duplicate key '" + key + "'");
    seen[key] = line_no;

    auto num = [&]() {
      try {
        return detail::parse_double(value, at);
      } catch (const InputError&) {
        throw ValidationError(key, at + ": expected a number, got '" + std::string(value) + "'");
      }
    };
    auto count = [&]() {
      try {
        return detail::parse_unsigned<std::size_t>(value, key);
      } catch (const ValidationError& e) {
        throw ValidationError(key, at + ": " + e.what());
      }
    };

    if (key == "portfolio_file") c.portfolio_file = std::string(value);
    else if (key == "mortality_file") c.mortality_file = std::string(value);
    else if (key == "synthetic_size") c.synthetic_size = count();
    else if (key == "synthetic_seed") c.synthetic_seed = detail::parse_unsigned<std::uint64_t>(value, key);
    else if (key == "mu") c.market.mu = num();
    else if (key == "sigma_x") c.market.sigma_x = num();
    else if (key == "r0") c.market.r0 = num();
    else if (key == "r_inf") c.market.r_inf = num();
    else if (key == "a_r") c.market.a_r = num();
    else if (key == "sigma_r") c.market.sigma_r = num();
    else if (key == "rho") c.market.rho = num();
    else if (key == "i") c.market.i = num();
    else if (key == "j") j = num();
    else if (key == "a_i") a_i = num();
    else if (key == "sigma_i") sigma_i = num();
    else if (key == "x0") x0 = num();
    else if (key == "theta") c.run.theta = num();
    else if (key == "e0_ratio") c.run.e0_ratio = num();
    else if (key == "dynamics") {
      if (value == "buy_and_hold") c.run.dynamics = Dynamics::buy_and_hold;
      else if (value == "rebalance") c.run.dynamics = Dynamics::rebalance;
      else throw ValidationError(key, at + ": expected buy_and_hold or rebalance");
    } else if (key == "indexation") c.run.indexation = detail::parse_bool(value, key);
    else if (key == "mortality_mode") {
      if (value == "deterministic") c.run.mortality_mode = MortalityMode::deterministic;
      else if (value == "stochastic") c.run.mortality_mode = MortalityMode::stochastic;
      else throw ValidationError(key, at + ": expected deterministic or stochastic");
    } else if (key == "n_paths") c.n_paths = count();
    else if (key == "m_mortality_paths") c.m_mortality_paths = count();
    else if (key == "sub_steps") c.sub_steps = count();
    else if (key == "theta_step") c.theta_step = num();
    else if (key == "theta_min") c.theta_min = num();
    else if (key == "theta_max") c.theta_max = num();
    else if (key == "seed") c.seed = detail::parse_unsigned<std::uint64_t>(value, key);
    else if (key == "pi_max") c.pi_max = num();
    else if (key == "study") c.study = detail::parse_study(value);
    else if (key == "output_dir") c.output_dir = std::string(value);
    else if (key == "workers") c.workers = detail::parse_unsigned<unsigned>(value, key);
    else if (key == "k_replication") c.k_replication = count();
    else if (key == "sweep_parameter") {
      if (value == "mu") c.sweep_parameter = SweepParameter::mu;
      else if (value == "sigma_x") c.sweep_parameter = SweepParameter::sigma_x;
      else throw ValidationError(key, at + ": expected mu or sigma_x");
    } else if (key == "sweep_values") {
      c.sweep_values.clear();
      if (!value.empty()) {
        for (auto item : detail::split(value, ',')) c.sweep_values.push_back(detail::parse_double(item, at));
      }
    } else if (key == "dump_paths") c.dump_paths = count();
    else throw InputError(at + ": unknown key '" + key + "'");
  }

  if (j || a_i || sigma_i || x0) {
    if (!j) throw ValidationError("j", "inflation parameters need j, a_i and sigma_i");
    if (!a_i) throw ValidationError("a_i", "inflation parameters need j, a_i and sigma_i");
    if (!sigma_i) throw ValidationError("sigma_i", "inflation parameters need j, a_i and sigma_i");
    c.inflation = InflationParams{.j = *j, .a_i = *a_i, .sigma_i = *sigma_i, .x0 = x0.value_or(0.0)};
  }
  validate(c);
  return c;
}

inline StudyConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  return load_config(in);
}

/// Canonical text form; load_config(write_config(c)) == c.
inline void write_config(std::ostream& out, const StudyConfig& c) {
  auto n = [](double v) { return format_number(v); };
  out << "portfolio_file = " << c.portfolio_file << '\n'
      << "mortality_file = " << c.mortality_file << '\n'
      << "synthetic_size = " << c.synthetic_size << '\n'
      << "synthetic_seed = " << c.synthetic_seed << '\n'
      << "mu = " << n(c.market.mu) << '\n'
      << "sigma_x = " << n(c.market.sigma_x) << '\n'
      << "r0 = " << n(c.market.r0) << '\n'
      << "r_inf = " << n(c.market.r_inf) << '\n'
      << "a_r = " << n(c.market.a_r) << '\n'
      << "sigma_r = " << n(c.market.sigma_r) << '\n'
      << "rho = " << n(c.market.rho) << '\n'
      << "i = " << n(c.market.i) << '\n';
  if (c.inflation) {
    out << "j = " << n(c.inflation->j) << '\n'
        << "a_i = " << n(c.inflation->a_i) << '\n'
        << "sigma_i = " << n(c.inflation->sigma_i) << '\n'
        << "x0 = " << n(c.inflation->x0) << '\n';
  }
  out << "theta = " << n(c.run.theta) << '\n'
      << "e0_ratio = " << n(c.run.e0_ratio) << '\n'
      << "dynamics = " << (c.run.dynamics == Dynamics::buy_and_hold ? "buy_and_hold" : "rebalance")
      << '\n'
      << "indexation = " << (c.run.indexation ? "on" : "off") << '\n'
      << "mortality_mode = "
      << (c.run.mortality_mode == MortalityMode::deterministic ? "deterministic" : "stochastic")
      << '\n'
      << "n_paths = " << c.n_paths << '\n'
      << "m_mortality_paths = " << c.m_mortality_paths << '\n'
      << "sub_steps = " << c.sub_steps << '\n'
      << "theta_step = " << n(c.theta_step) << '\n'
      << "theta_min = " << n(c.theta_min) << '\n'
      << "theta_max = " << n(c.theta_max) << '\n'
      << "seed = " << c.seed << '\n'
      << "pi_max = " << n(c.pi_max) << '\n'
      << "study = " << to_string(c.study) << '\n'
      << "output_dir = " << c.output_dir << '\n'
      << "workers = " << c.workers << '\n'
      << "k_replication = " << c.k_replication << '\n'
      << "sweep_parameter = " << to_string(c.sweep_parameter) << '\n'
      << "sweep_values = ";
  for (std::size_t k = 0; k < c.sweep_values.size(); ++k) {
    out << (k ? "," : "") << n(c.sweep_values[k]);
  }
  out << '\n' << "dump_paths = " << c.dump_paths << '\n';
}

/// FNV-1a over the canonical config text, ignoring the keys that do not
/// affect results (output_dir, workers).
inline std::uint64_t config_hash(const StudyConfig& c) {
  StudyConfig canonical = c;
  canonical.output_dir.clear();
  canonical.workers = 0;
  std::ostringstream text;
  write_config(text, canonical);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : text.str()) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

struct StudyResult {
  StudyKind study = StudyKind::mfpe_curve;
  std::vector<ResultRow> rows;
  std::optional<MutualizationResult> mutualization;
  std::vector<ResultRow> replicated_rows;  // mutualization: k-fold block
  std::vector<SweepRow> sweep;
  std::optional<AllocationResult> ruin_cap;
  std::optional<AllocationResult> mfpe;
  double reserve0 = 0.0;
  std::optional<double> indexed_reserve0;
  double duration = 0.0;
  std::optional<double> indexed_duration;
  std::vector<std::string> warnings;
  double wall_seconds = 0.0;
};

/// Loads or synthesizes the liability inputs named by the config.
inline LiabilityModel build_liability_model(const StudyConfig& c) {
  MortalityTable table = c.mortality_file.empty() ? makeham_table() : read_mortality_table(c.mortality_file);
  AnnuityPortfolio portfolio;
  if (c.portfolio_file.empty()) {
    SyntheticPortfolioParams sp;
    sp.size = c.synthetic_size;
    sp.seed = c.synthetic_seed;
    portfolio = synthetic_portfolio(sp);
  } else {
    portfolio = read_portfolio(c.portfolio_file);
  }
  return LiabilityModel(std::move(portfolio), std::move(table), c.market.i, c.inflation);
}

/// Runs the configured study in memory.
inline StudyResult compute_study(const StudyConfig& c) {
  const auto start = std::chrono::steady_clock::now();
  StudyResult res;
  res.study = c.study;
  res.warnings = validate(c);
  const LiabilityModel model = build_liability_model(c);
  res.reserve0 = model.reserve0();
  res.duration = macaulay_duration(model.expected(), c.market.i);
  if (c.inflation) {
    res.indexed_reserve0 = model.indexed_reserve0();
    res.indexed_duration = macaulay_duration(
        indexed_flows(model.expected(), *c.inflation, c.inflation->x0), c.market.i);
  }

  RunConfig run = c.run;
  if (c.study == StudyKind::indexed_ruin_curve || c.study == StudyKind::indexed_mfpe) {
    run.indexation = true;
  }
  const auto thetas = theta_grid(c.theta_step, c.theta_min, c.theta_max);

  if (c.study == StudyKind::sensitivity) {
    SweepSetup setup{.market = c.market,
                     .inflation = c.inflation,
                     .config = run,
                     .n_paths = c.n_paths,
                     .sub_steps = c.sub_steps,
                     .seed = c.seed,
                     .thetas = thetas,
                     .workers = c.workers};
    res.sweep = sensitivity_sweep(setup, model, c.sweep_parameter, c.sweep_values);
    res.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
  }

  const auto scenarios = generate_scenarios(c.market, c.inflation, c.n_paths, model.horizon(),
                                            c.sub_steps, c.seed, c.workers);
  std::vector<MortalityPath> mortality;
  const bool stochastic = run.mortality_mode == MortalityMode::stochastic;
  if (stochastic || c.study == StudyKind::variance_decomp) {
    mortality = simulate_mortality_paths(model.portfolio(), model.table(), c.m_mortality_paths,
                                         c.seed, c.workers);
  }
  const auto* mort_ptr = stochastic ? &mortality : nullptr;

  switch (c.study) {
    case StudyKind::ruin_curve:
    case StudyKind::indexed_ruin_curve: {
      const auto ruin = ruin_curve(scenarios, model, run, thetas, mort_ptr, c.workers);
      for (const auto& r : ruin) {
        ResultRow row;
        row.theta = r.theta;
        row.ruin = r;
        res.rows.push_back(row);
      }
      res.ruin_cap = optimize_ruin_cap(ruin, c.pi_max);
      break;
    }
    case StudyKind::mfpe_curve:
    case StudyKind::indexed_mfpe: {
      const auto reserves = economic_reserve_curve(scenarios, model, run, thetas, mort_ptr, c.workers);
      for (const auto& r : reserves) {
        ResultRow row;
        row.theta = r.theta;
        row.reserve = r;
        res.rows.push_back(row);
      }
      res.mfpe = optimize_mfpe(reserves);
      RunConfig at_star = run;
      at_star.theta = res.mfpe->theta_star;
      attach_ruin(*res.mfpe, ruin_probability(scenarios, model, at_star, mort_ptr, c.workers));
      break;
    }
    case StudyKind::variance_decomp: {
      for (double theta : thetas) {
        RunConfig cfg = run;
        cfg.theta = theta;
        const auto d = variance_decomposition(scenarios, model, cfg, mortality, c.workers);
        EconomicReserveEstimate e;
        e.theta = theta;
        e.lambda_mean = d.lambda_mean;
        e.lambda_std_error = d.lambda_std_error;
        ResultRow row;
        row.theta = theta;
        row.reserve = e;
        row.variance = d;
        res.rows.push_back(row);
      }
      break;
    }
    case StudyKind::mutualization: {
      const LiabilityModel big(model.portfolio().replicated(c.k_replication), model.table(),
                               model.rate(), model.inflation());
      const auto base_paths = simulate_mortality_paths(model.portfolio(), model.table(),
                                                       c.m_mortality_paths, c.seed, c.workers);
      const auto big_paths = simulate_mortality_paths(big.portfolio(), big.table(),
                                                      c.m_mortality_paths, c.seed, c.workers);
      for (double theta : thetas) {
        RunConfig cfg = run;
        cfg.theta = theta;
        const auto b = variance_decomposition(scenarios, model, cfg, base_paths, c.workers);
        const auto r = c.k_replication == 1
                           ? b
                           : variance_decomposition(scenarios, big, cfg, big_paths, c.workers);
        ResultRow row;
        row.theta = theta;
        row.variance = b;
        res.rows.push_back(row);
        row.variance = r;
        res.replicated_rows.push_back(row);
        if (theta == thetas.front() || std::abs(theta - c.run.theta) < 0.5 * c.theta_step) {
          res.mutualization = MutualizationResult{c.k_replication, b, r};
        }
      }
      break;
    }
    case StudyKind::sensitivity:
      break;
  }

  if (c.dump_paths > 0) {
    std::filesystem::create_directories(c.output_dir);
    const std::size_t n = std::min(c.dump_paths, scenarios.n_paths);
    ScenarioSet head = scenarios;
    head.n_paths = n;
    std::ofstream paths_out(std::filesystem::path(c.output_dir) / "paths.csv");
    write_paths_csv(paths_out, head);
    std::ofstream bs_out(std::filesystem::path(c.output_dir) / "balance_sheet.csv");
    for (std::size_t k = 0; k < n; ++k) {
      const auto bs = run_path(scenarios.path(k), model, run,
                               stochastic ? &mortality[k % mortality.size()] : nullptr);
      write_balance_sheet_csv(bs_out, k, bs, k == 0);
    }
  }
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

/// Results table for a finished study. Mutualization writes two blocks with a
/// leading `portfolio` column; sensitivity writes the sweep table.
inline void write_study_csv(std::ostream& out, const StudyResult& res, const StudyConfig& c) {
  switch (res.study) {
    case StudyKind::sensitivity:
      write_sweep_csv(out, c.sweep_parameter, res.sweep);
      break;
    case StudyKind::mutualization:
      write_results_csv(out, res.rows, true, "portfolio,", "base,");
      write_results_csv(out, res.replicated_rows, false, {},
                        "x" + std::to_string(c.k_replication) + ",");
      break;
    default:
      write_results_csv(out, res.rows);
  }
}

/// Human-readable summary; `res == nullptr` means no study ran.
inline std::string emit_summary(const StudyResult* res) {
  if (res == nullptr) return "no study run\n";
  std::ostringstream out;
  auto n = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return std::string(buf);
  };
  auto pct = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
    return std::string(buf);
  };
  out << "study: " << to_string(res->study) << '\n';
  const bool empty = res->rows.empty() && res->sweep.empty();
  if (empty) {
    out << "no study run\n";
    return out.str();
  }
  out << "L0 (flat reserve): " << n(res->reserve0) << '\n';
  out << "duration (flat): " << n(res->duration) << " years\n";
  if (res->indexed_reserve0) {
    out << "L0^I (indexed reserve): " << n(*res->indexed_reserve0)
        << "  ratio L0^I/L0: " << n(*res->indexed_reserve0 / res->reserve0) << '\n';
  }
  if (res->indexed_duration) out << "duration (indexed): " << n(*res->indexed_duration) << " years\n";
  auto allocation = [&](const char* label, const AllocationResult& a) {
    out << label << ": theta* = " << pct(a.theta_star) << ", objective = " << n(a.objective_at_star)
        << " (se " << n(a.objective_std_error) << ")";
    if (!std::isnan(a.ruin_prob_at_star)) {
      out << ", ruin probability at theta* = " << pct(a.ruin_prob_at_star) << " (se "
          << pct(a.ruin_se_at_star) << ")";
    }
    out << '\n';
    if (!a.feasible) out << "  infeasible: no grid point meets the cap; minimal-ruin theta shown\n";
    if (a.boundary) out << "  boundary solution\n";
    if (a.flat) out << "  flat objective: tie broken toward the smallest theta\n";
  };
  if (res->ruin_cap) allocation("ruin cap", *res->ruin_cap);
  if (res->mfpe) allocation("MFPE", *res->mfpe);
  if (res->mutualization) {
    const auto& m = *res->mutualization;
    out << "mutualization at theta = " << pct(m.base.theta) << ": financial share "
        << pct(m.base.financial_share) << " (base) vs " << pct(m.replicated.financial_share)
        << " (x" << m.k << ")\n";
  }
  for (const auto& row : res->sweep) {
    out << "sweep value " << n(row.value) << ": theta* = " << pct(row.result.theta_star)
        << ", ruin at theta* = " << pct(row.result.ruin_prob_at_star)
        << (row.result.boundary ? " (boundary)" : "") << '\n';
  }
  for (const auto& w : res->warnings) out << "warning: " << w << '\n';
  return out.str();
}

/// Runs the study and writes the results table plus a summary and manifest into
/// the output directory.
inline StudyResult run_study(const StudyConfig& c) {
  StudyResult res = compute_study(c);
  const std::filesystem::path dir(c.output_dir);
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "results.csv");
    if (!out) throw std::runtime_error("cannot write " + (dir / "results.csv").string());
    write_study_csv(out, res, c);
    if (!out) throw std::runtime_error("write failed: " + (dir / "results.csv").string());
  }
  {
    std::ofstream out(dir / "summary.txt");
    out << emit_summary(&res);
  }
  {
    std::ofstream out(dir / "manifest.txt");
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash(c)));
    out << "version = " << kVersion << '\n'
        << "study = " << to_string(c.study) << '\n'
        << "seed = " << c.seed << '\n'
        << "params_hash = " << hash << '\n'
        << "rows = " << (c.study == StudyKind::sensitivity ? res.sweep.size()
                                                            : res.rows.size() + res.replicated_rows.size())
        << '\n'
        << "wall_seconds = " << res.wall_seconds << '\n'
        << "# config\n";
    write_config(out, c);
  }
  return res;
}

}  // namespace alm
