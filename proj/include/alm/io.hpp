#pragma once

// Delimited-text readers and writers for mortality tables and portfolios, and
// the synthetic datasets shipped with the tool.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "alm/errors.hpp"
#include "alm/mortality.hpp"
#include "alm/rng.hpp"

namespace alm {

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline char detect_delimiter(std::string_view header) {
  for (char d : {',', ';', '\t'}) {
    if (header.find(d) != std::string_view::npos) return d;
  }
  return ',';
}

inline std::vector<std::string_view> split(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double parse_double(std::string_view text, const std::string& where) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc{} || ptr != end || text.empty()) {
    throw InputError(where + ": cannot parse number '" + std::string(text) + "'");
  }
  return v;
}

/// Reads a two-column file with a required header. Returns the data rows.
inline std::vector<std::pair<double, double>> read_two_columns(std::istream& in,
                                                               const std::string& what,
                                                               const std::string& col0,
                                                               const std::string& col1) {
  std::string line;
  std::size_t line_no = 0;
  char delim = ',';
  bool have_header = false;
  std::vector<std::pair<double, double>> rows;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    if (!have_header) {
      delim = detect_delimiter(view);
      const auto cols = split(view, delim);
      if (cols.size() != 2 || cols[0] != col0 || cols[1] != col1) {
        throw InputError(what + " line " + std::to_string(line_no) + ": expected header '" + col0 +
                         "," + col1 + "'");
      }
      have_header = true;
      continue;
    }
    const auto cols = split(view, delim);
    const std::string where = what + " line " + std::to_string(line_no);
    if (cols.size() != 2) throw InputError(where + ": expected 2 columns");
    rows.emplace_back(parse_double(cols[0], where), parse_double(cols[1], where));
  }
  if (!have_header) throw InputError(what + ": missing header row");
  return rows;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

}  // namespace detail

/// Mortality table file: header `age,lx`, one row per contiguous integer age.
inline MortalityTable read_mortality_table(std::istream& in) {
  const auto rows = detail::read_two_columns(in, "mortality table", "age", "lx");
  if (rows.empty()) throw InputError("mortality table: no rows");
  std::vector<double> lx;
  lx.reserve(rows.size());
  const double first = rows.front().first;
  if (first != std::floor(first)) throw InputError("mortality table: ages must be integers");
  for (std::size_t k = 0; k < rows.size(); ++k) {
    if (rows[k].first != first + static_cast<double>(k)) {
      throw InputError("mortality table: ages not contiguous at row " + std::to_string(k + 1));
    }
    lx.push_back(rows[k].second);
  }
  return MortalityTable(static_cast<int>(first), std::move(lx));
}

inline MortalityTable read_mortality_table(const std::string& path) {
  auto in = detail::open_input(path);
  return read_mortality_table(in);
}

/// Portfolio file: header `age,annual_annuity`, one row per annuitant.
/// Fractional ages are floored to the last birthday.
inline AnnuityPortfolio read_portfolio(std::istream& in) {
  const auto rows = detail::read_two_columns(in, "portfolio", "age", "annual_annuity");
  AnnuityPortfolio p;
  p.annuitants.reserve(rows.size());
  for (const auto& [age, amount] : rows) {
    if (!(age >= 0.0)) throw InputError("portfolio: negative age");
    if (!(amount >= 0.0)) throw InputError("portfolio: negative annuity");
    p.annuitants.push_back({static_cast<int>(std::floor(age)), amount});
  }
  return p;
}

inline AnnuityPortfolio read_portfolio(const std::string& path) {
  auto in = detail::open_input(path);
  return read_portfolio(in);
}

inline void write_mortality_table(std::ostream& out, const MortalityTable& table) {
  out << "age,lx\n";
  out.precision(17);
  for (int age = table.base_age(); age <= table.omega(); ++age) {
    out << age << ',' << table.lx(age) << '\n';
  }
}

inline void write_portfolio(std::ostream& out, const AnnuityPortfolio& p) {
  out << "age,annual_annuity\n";
  out.precision(17);
  for (const auto& a : p.annuitants) out << a.age0 << ',' << a.annuity << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Makeham survivor column l_x = l_0 exp(-A x - B (c^x - 1) / ln c) on ages
/// 0..omega, with l_omega forced to 0.
struct MakehamParams {
  double a = 2e-4;
  double b = 6e-6;
  double c = 1.115;
  int omega = 120;
  double radix = 100000.0;
};

inline MortalityTable makeham_table(const MakehamParams& p = {}) {
  if (p.omega < 2 || !(p.c > 1.0) || p.a < 0.0 || p.b < 0.0) {
    throw InputError("makeham_table: invalid parameters");
  }
  std::vector<double> lx(static_cast<std::size_t>(p.omega) + 1);
  const double log_c = std::log(p.c);
  for (int x = 0; x <= p.omega; ++x) {
    lx[static_cast<std::size_t>(x)] =
        p.radix * std::exp(-p.a * x - p.b / log_c * (std::pow(p.c, x) - 1.0));
  }
  lx.back() = 0.0;
  return MortalityTable(0, std::move(lx));
}

struct SyntheticPortfolioParams {
  std::size_t size = 374;
  double mean_age = 63.8;
  double age_sd = 5.5;
  int min_age = 50;
  int max_age = 95;
  double mean_annuity = 5491.0;
  double annuity_log_sd = 0.6;
  std::uint64_t seed = 20031231;
};

/// Random portfolio with the requested summary statistics: integer ages with
/// mean within 0.5/size of mean_age, log-normal annuities rescaled to an exact
/// mean.
inline AnnuityPortfolio synthetic_portfolio(const SyntheticPortfolioParams& p = {}) {
  if (p.size == 0) throw InputError("synthetic_portfolio: size must be > 0");
  if (p.min_age > p.max_age || p.mean_age < p.min_age || p.mean_age > p.max_age) {
    throw InputError("synthetic_portfolio: inconsistent age bounds");
  }
  RandomStream stream(p.seed, StreamDomain::portfolio, 0);
  AnnuityPortfolio out;
  out.annuitants.resize(p.size);
  double amount_sum = 0.0;
  long age_sum = 0;
  for (auto& a : out.annuitants) {
    const double age = std::round(p.mean_age + p.age_sd * stream.normal());
    a.age0 = std::clamp(static_cast<int>(age), p.min_age, p.max_age);
    a.annuity = std::exp(p.annuity_log_sd * stream.normal());
    amount_sum += a.annuity;
    age_sum += a.age0;
  }
  const double scale = p.mean_annuity * static_cast<double>(p.size) / amount_sum;
  for (auto& a : out.annuitants) a.annuity *= scale;

  // Nudge ages one year at a time until the total matches the target.
  const long target = std::lround(p.mean_age * static_cast<double>(p.size));
  std::size_t k = 0;
  std::size_t stalled = 0;
  while (age_sum != target && stalled < p.size) {
    auto& a = out.annuitants[k];
    const int step = age_sum < target ? 1 : -1;
    if (a.age0 + step >= p.min_age && a.age0 + step <= p.max_age) {
      a.age0 += step;
      age_sum += step;
      stalled = 0;
    } else {
      ++stalled;
    }
    k = (k + 1) % p.size;
  }
  return out;
}

}  // namespace alm
