#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "test_support.hpp"

using namespace alm;
using alm::testing::scenarios_from;

namespace {

LiabilityTrack track_of(std::vector<double> paid, std::vector<double> reserve) {
  return {std::move(paid), std::move(reserve)};
}

}  // namespace

TEST(BalanceSheet, OnePeriodHandCase) {
  // A_1 = w_1 (A_0 - P_1 / w_1) with w_1 = 0.5*1.1 + 0.5*1.02 = 1.06.
  const auto s = scenarios_from({{1.0, 1.1}}, {{1.0, 1.02}});
  RunConfig cfg;
  cfg.theta = 0.5;
  cfg.e0_ratio = 0.0;
  const auto bs = balance_sheet(s.path(0), track_of({0.0, 10.0}, {100.0, 0.0}), cfg);
  EXPECT_DOUBLE_EQ(bs.A[0], 100.0);
  EXPECT_NEAR(bs.A[1], 96.0, 1e-12);
  EXPECT_NEAR(bs.E[1], 96.0, 1e-12);
  EXPECT_FALSE(bs.ruin_year_accounting);
}

TEST(BalanceSheet, RebalancingHandCase) {
  // Year 1: growth 0.5*1.2 + 0.5*1.0 = 1.1 -> 110 - 10 = 100.
  // Year 2: growth 0.5*(0.9/1.2) + 0.5*1.0 = 0.875 -> 87.5 - 10 = 77.5.
  const auto s = scenarios_from({{1.0, 1.2, 0.9}}, {{1.0, 1.0, 1.0}});
  RunConfig cfg;
  cfg.theta = 0.5;
  cfg.e0_ratio = 0.0;
  cfg.dynamics = Dynamics::rebalance;
  const auto bs = balance_sheet(s.path(0), track_of({0, 10, 10}, {100, 50, 0}), cfg);
  EXPECT_NEAR(bs.A[1], 100.0, 1e-12);
  EXPECT_NEAR(bs.A[2], 77.5, 1e-12);
}

TEST(BalanceSheet, BuyAndHoldHandCaseTwoYears) {
  // w = X here (theta = 1): A_2 = 0.9 (100 - 10/1.2 - 10/0.9).
  const auto s = scenarios_from({{1.0, 1.2, 0.9}}, {{1.0, 1.0, 1.0}});
  RunConfig cfg;
  cfg.theta = 1.0;
  cfg.e0_ratio = 0.0;
  const auto bs = balance_sheet(s.path(0), track_of({0, 10, 10}, {100, 50, 0}), cfg);
  EXPECT_NEAR(bs.A[2], 0.9 * (100.0 - 10.0 / 1.2 - 10.0 / 0.9), 1e-12);
}

TEST(BalanceSheet, RuinYearsAndMagnitude) {
  const auto s = scenarios_from({{1.0, 0.5, 0.5, 0.5}}, {{1.0, 1.0, 1.0, 1.0}});
  RunConfig cfg;
  cfg.theta = 1.0;
  cfg.e0_ratio = 0.0;
  // A: 100 -> 50-10 = 40 -> 40-10 = 30 -> 30-40 = -10 (exhausted).
  const auto bs = balance_sheet(s.path(0), track_of({0, 10, 10, 40}, {100, 60, 45, 0}), cfg);
  ASSERT_TRUE(bs.ruin_year_accounting);
  EXPECT_EQ(*bs.ruin_year_accounting, 1u);
  ASSERT_TRUE(bs.ruin_year_economic);
  EXPECT_EQ(*bs.ruin_year_economic, 3u);
  EXPECT_NEAR(bs.ruin_magnitude(), 20.0, 1e-12);  // min E = -20 at t = 1
}

TEST(BalanceSheet, NonPositiveInitialAssetsAreEconomicRuinAtZero) {
  const auto s = scenarios_from({{1.0, 1.0}}, {{1.0, 1.0}});
  RunConfig cfg;
  cfg.e0_ratio = 0.0;
  auto bs = balance_sheet(s.path(0), track_of({0, 0}, {100, 0}), cfg);
  EXPECT_FALSE(bs.ruin_year_accounting);
  cfg.e0_ratio = 0.0;
  bs = balance_sheet(s.path(0), track_of({0, 0}, {-1.0, 0}), cfg);
  ASSERT_TRUE(bs.ruin_year_economic);
  EXPECT_EQ(*bs.ruin_year_economic, 0u);
}

TEST(BalanceSheet, ExhaustedAssetsStopEarning) {
  const auto s = scenarios_from({{1.0, 1.0, 3.0, 3.0}}, {{1.0, 1.0, 1.0, 1.0}});
  RunConfig cfg;
  cfg.theta = 1.0;
  cfg.e0_ratio = 0.0;
  const auto bs = balance_sheet(s.path(0), track_of({0, 15, 5, 5}, {10, 0, 0, 0}), cfg);
  EXPECT_NEAR(bs.A[1], -5.0, 1e-12);
  EXPECT_NEAR(bs.A[2], -10.0, 1e-12);  // no tripling of a negative fund
  EXPECT_NEAR(bs.A[3], -15.0, 1e-12);
}

TEST(BalanceSheet, ClosedFormRecursionAndEvolveAgree) {
  const auto model = alm::testing::small_model(30);
  const auto s = generate_scenarios(MarketParams::reference(), std::nullopt, 20, model.horizon(),
                                    4, 3, 1);
  RunConfig cfg;
  for (double theta : {0.0, 0.164, 0.5, 1.0}) {
    cfg.theta = theta;
    for (std::size_t n = 0; n < s.n_paths; ++n) {
      const auto track = liability_track(model, s.path(n), cfg);
      const double a0 = initial_assets(track, cfg);
      const auto rec = buy_and_hold_recursive(s.path(n), track.paid, theta, a0);
      const auto closed = buy_and_hold_closed_form(s.path(n), track.paid, theta, a0);
      const auto bs = balance_sheet(s.path(n), track, cfg);
      for (std::size_t t = 0; t < rec.size() && closed[t] > 0.0; ++t) {
        EXPECT_LE(std::abs(rec[t] - closed[t]), 1e-12 * a0);
        EXPECT_LE(std::abs(bs.A[t] - closed[t]), 1e-12 * a0);
      }
    }
  }
}

TEST(BalanceSheet, RebalanceAndBuyAndHoldCoincideAtCorners) {
  const auto model = alm::testing::small_model(20);
  const auto s = generate_scenarios(MarketParams::reference(), std::nullopt, 5, model.horizon(),
                                    2, 8, 1);
  for (double theta : {0.0, 1.0}) {
    RunConfig a;
    a.theta = theta;
    RunConfig b = a;
    b.dynamics = Dynamics::rebalance;
    for (std::size_t n = 0; n < s.n_paths; ++n) {
      const auto x = run_path(s.path(n), model, a);
      const auto y = run_path(s.path(n), model, b);
      for (std::size_t t = 0; t < x.A.size(); ++t) {
        EXPECT_LE(std::abs(x.A[t] - y.A[t]), 1e-10 * x.A[0]);
      }
    }
  }
}

TEST(LiabilityTrack, ReserveRecursionMatchesTailRecompute) {
  const auto model = alm::testing::small_model();
  const auto rec = reserve_recursion(model.expected(), model.rate());
  const double l0 = rec[0];
  for (std::size_t t = 0; t < rec.size(); ++t) {
    EXPECT_LE(std::abs(rec[t] - reserve_at(model.expected(), model.rate(), t)), 1e-12 * l0);
  }
}

TEST(LiabilityTrack, StochasticWithCertainSurvivalEqualsDeterministic) {
  const auto table = alm::testing::immortal_table(60, 80);
  const LiabilityModel model(AnnuityPortfolio{{{60, 100.0}, {65, 50.0}}}, table, 0.03);
  const auto s = scenarios_from({std::vector<double>(21, 1.0)}, {std::vector<double>(21, 1.0)});
  RunConfig det;
  RunConfig sto;
  sto.mortality_mode = MortalityMode::stochastic;
  RandomStream rs(1, StreamDomain::mortality, 0);
  const auto life = simulate_lifetimes(model.portfolio(), table, rs);
  EXPECT_EQ(life[0], 19);  // l_80 = 0: dies in the year from 79 to 80
  EXPECT_EQ(life[1], 14);
  const auto a = liability_track(model, s.path(0), det);
  const auto b = liability_track(model, s.path(0), sto, &life);
  for (std::size_t t = 0; t < a.paid.size(); ++t) {
    EXPECT_NEAR(a.paid[t], b.paid[t], 1e-12);
    EXPECT_NEAR(a.reserve[t], b.reserve[t], 1e-9);
  }
}

TEST(LiabilityTrack, IndexedWithoutInflationEqualsFlat) {
  const InflationParams none{.j = 0.0, .a_i = 0.6, .sigma_i = 0.0, .x0 = 0.0};
  const auto model = alm::testing::small_model(20, 0.025, none);
  const auto s = generate_scenarios(MarketParams::reference(), none, 3, model.horizon(), 4, 2, 1);
  RunConfig flat;
  RunConfig indexed;
  indexed.indexation = true;
  for (std::size_t n = 0; n < s.n_paths; ++n) {
    const auto a = liability_track(model, s.path(n), flat);
    const auto b = liability_track(model, s.path(n), indexed);
    for (std::size_t t = 0; t < a.paid.size(); ++t) {
      EXPECT_NEAR(a.paid[t], b.paid[t], 1e-9);
      EXPECT_NEAR(a.reserve[t], b.reserve[t], 1e-6);
    }
  }
}

TEST(LiabilityTrack, RejectsInconsistentInputs) {
  const auto model = alm::testing::small_model(10);
  const auto s = scenarios_from({{1.0, 1.0}}, {{1.0, 1.0}});
  RunConfig cfg;
  EXPECT_THROW(liability_track(model, s.path(0), cfg), InputError);
  const auto full = generate_scenarios(MarketParams::reference(), std::nullopt, 1, model.horizon(),
                                       1, 1, 1);
  cfg.indexation = true;
  EXPECT_THROW(liability_track(model, full.path(0), cfg), InputError);
  cfg.indexation = false;
  cfg.mortality_mode = MortalityMode::stochastic;
  EXPECT_THROW(liability_track(model, full.path(0), cfg), InputError);
  cfg.theta = 1.5;
  EXPECT_THROW(validate(cfg), ValidationError);
}

TEST(Submartingale, RisklessExcessReturnPasses) {
  const auto model = alm::testing::small_model(20);
  const auto m = alm::testing::flat_market(0.05, 0.025);
  const auto s = generate_scenarios(m, std::nullopt, 4, model.horizon(), 4, 1, 1);
  std::vector<BalanceSheetPath> paths;
  RunConfig cfg;
  cfg.theta = 0.3;
  for (std::size_t n = 0; n < s.n_paths; ++n) paths.push_back(run_path(s.path(n), model, cfg));
  const auto d = submartingale_check(paths, 0.025);
  EXPECT_TRUE(d.passes);
  EXPECT_GT(d.mean_equity_next, d.threshold);
}

TEST(Submartingale, ShortfallAgainstTechnicalRateFailsWithMessage) {
  const auto model = alm::testing::small_model(20);
  auto m = alm::testing::flat_market(0.01, 0.025);
  EXPECT_FALSE(rate_ordering_holds(m));
  const auto s = generate_scenarios(m, std::nullopt, 4, model.horizon(), 4, 1, 1);
  std::vector<BalanceSheetPath> paths;
  RunConfig cfg;
  for (std::size_t n = 0; n < s.n_paths; ++n) paths.push_back(run_path(s.path(n), model, cfg));
  const auto d = submartingale_check(paths, 0.025, 0, rate_ordering_holds(m));
  EXPECT_FALSE(d.passes);
  EXPECT_NE(d.message.find("rate ordering"), std::string::npos);
}

TEST(BalanceSheet, AuditCsvRows) {
  const auto s = scenarios_from({{1.0, 1.1}}, {{1.0, 1.02}});
  RunConfig cfg;
  const auto bs = balance_sheet(s.path(0), track_of({0.0, 10.0}, {100.0, 0.0}), cfg);
  std::ostringstream out;
  write_balance_sheet_csv(out, 7, bs, true);
  EXPECT_EQ(out.str().substr(0, 16), "path,year,A,L,E\n");
  EXPECT_NE(out.str().find("\n7,1,"), std::string::npos);
}
