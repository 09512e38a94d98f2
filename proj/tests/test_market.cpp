#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "test_support.hpp"

using namespace alm;

TEST(RandomStream, SubStreamsAreReproducibleAndDistinct) {
  RandomStream a(42, StreamDomain::market, 3), b(42, StreamDomain::market, 3);
  RandomStream c(42, StreamDomain::market, 4), d(42, StreamDomain::mortality, 3);
  for (int k = 0; k < 100; ++k) {
    const double va = a.uniform();
    EXPECT_EQ(va, b.uniform());
    EXPECT_GE(va, 0.0);
    EXPECT_LT(va, 1.0);
  }
  RandomStream a2(42, StreamDomain::market, 3);
  EXPECT_NE(a2.uniform(), c.uniform());
  RandomStream a3(42, StreamDomain::market, 3);
  EXPECT_NE(a3.uniform(), d.uniform());
}

TEST(RandomStream, NormalMoments) {
  RandomStream s(1, StreamDomain::market, 0);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
  for (int k = 0; k < n; ++k) {
    const double z = s.normal();
    sum += z;
    sum2 += z * z;
    sum4 += z * z * z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 4.0 / std::sqrt(n));
  EXPECT_NEAR(sum2 / n, 1.0, 4.0 * std::sqrt(2.0 / n));
  EXPECT_NEAR(sum4 / n, 3.0, 4.0 * std::sqrt(96.0 / n));
}

TEST(Kernels, GbmWithoutVolatilityIsDeterministic) {
  EXPECT_NEAR(gbm_step(2.0, 0.05, 0.0, 1.0, 1.7), 2.0 * std::exp(0.05), 1e-15);
}

TEST(Kernels, CirStaysNonNegativeAndHitsHandValue) {
  // r = 0.03, a = 0.5, r_inf = 0.05, sigma = 0.02, dt = 0.25, z = 1:
  // 0.03 + 0.5*0.02*0.25 + 0.02*sqrt(0.0075) + 0.0001*0*0.25
  const double expected = 0.03 + 0.0025 + 0.02 * std::sqrt(0.0075);
  EXPECT_NEAR(cir_step_milstein(0.03, 0.5, 0.05, 0.02, 0.25, 1.0), expected, 1e-15);
  EXPECT_EQ(cir_step_milstein(0.001, 0.5, 0.05, 0.5, 0.25, -1.0), 0.0);
  EXPECT_GE(cir_step_milstein(-0.01, 0.5, 0.05, 0.02, 0.25, 0.0), 0.0);
}

TEST(Kernels, CashAccountLeftPoint) {
  const std::vector<double> r{0.02, 0.04};
  EXPECT_NEAR(cash_account_step(1.0, r), std::exp(0.03), 1e-15);
  EXPECT_NEAR(cash_account_step(2.0, std::vector<double>(12, 0.05)), 2.0 * std::exp(0.05), 1e-14);
}

TEST(Kernels, OuStepMeanAndVariance) {
  const double a = 0.7, s = 0.3, dt = 0.5;
  EXPECT_NEAR(ou_step(0.1, a, s, dt, 0.0), 0.1 * std::exp(-a * dt), 1e-15);
  const double sd = ou_step(0.0, a, s, dt, 1.0);
  EXPECT_NEAR(sd * sd, s * s * (1 - std::exp(-2 * a * dt)) / (2 * a), 1e-15);
}

TEST(InflationFactor, ClosedFormMatchesNumericalIntegrationOracle) {
  // Oracle: adaptive 2-D quadrature of the OU covariance kernel over the
  // triangle v < u (absolute error estimate below 1e-17).
  const auto p = InflationParams::reference();
  EXPECT_NEAR(integrated_ou_variance(p.a_i, p.sigma_i, 1.0), 6.23542382075269e-06, 1e-18);
  EXPECT_NEAR(integrated_ou_variance(p.a_i, p.sigma_i, 5.0), 0.000175110474239712, 1e-17);
  EXPECT_NEAR(integrated_ou_variance(p.a_i, p.sigma_i, 20.0), 0.00103746340673413, 1e-16);
  EXPECT_NEAR(inflation_factor(0.0, p, 1.0), 1.02829605592065, 1e-13);
  EXPECT_NEAR(inflation_factor(0.0, p, 5.0), 1.14979947227649, 1e-13);
  EXPECT_NEAR(inflation_factor(0.0, p, 20.0), 1.74808120429974, 1e-13);
  EXPECT_NEAR(inflation_factor(0.01, p, 3.0), 1.1005597687911, 1e-13);
  EXPECT_THROW(inflation_factor(0.0, p, 0.0), InputError);
}

TEST(InflationFactor, DegeneratesToDeterministicGrowth) {
  const InflationParams p{.j = 0.02, .a_i = 1.3, .sigma_i = 0.0, .x0 = 0.0};
  for (double d : {0.5, 1.0, 7.0}) EXPECT_NEAR(inflation_factor(0.0, p, d), std::exp(0.02 * d), 1e-14);
}

TEST(InflationFactor, MonotoneInStateAndVolatility) {
  auto p = InflationParams::reference();
  EXPECT_LT(inflation_factor(-0.01, p, 4.0), inflation_factor(0.0, p, 4.0));
  EXPECT_LT(inflation_factor(0.0, p, 4.0), inflation_factor(0.01, p, 4.0));
  const double base = inflation_factor(0.0, p, 4.0);
  p.sigma_i *= 3.0;
  EXPECT_GT(inflation_factor(0.0, p, 4.0), base);
}

TEST(MarketParams, ValidationRulesAndWarnings) {
  EXPECT_TRUE(validate(MarketParams::reference()).empty());
  auto p = MarketParams::reference();
  p.rho = 1.5;
  try {
    validate(p);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "rho");
  }
  p = MarketParams::reference();
  p.sigma_x = -0.1;
  EXPECT_THROW(validate(p), ValidationError);
  p = MarketParams::reference();
  p.sigma_r = 1.0;  // 2 a r_inf < sigma^2
  EXPECT_THROW(validate(p), ValidationError);
  p = MarketParams::reference();
  p.mu = 0.01;  // below r_inf
  EXPECT_EQ(validate(p).size(), 1u);
  InflationParams ip = InflationParams::reference();
  ip.a_i = 0.0;
  EXPECT_THROW(validate(ip), ValidationError);
}

TEST(Scenarios, ShapeAndStartingValues) {
  const auto s = generate_scenarios(MarketParams::reference(), InflationParams::reference(), 5, 10,
                                    4, 99, 1);
  EXPECT_EQ(s.X.size(), 5u * 11u);
  for (std::size_t n = 0; n < 5; ++n) {
    const auto p = s.path(n);
    EXPECT_EQ(p.X[0], 1.0);
    EXPECT_EQ(p.Y[0], 1.0);
    EXPECT_EQ(p.I[0], 1.0);
    EXPECT_NEAR(p.r[0], std::log(1.03), 1e-15);
    for (std::size_t t = 0; t <= 10; ++t) {
      EXPECT_GT(p.X[t], 0.0);
      EXPECT_GE(p.r[t], 0.0);
      EXPECT_GT(p.I[t], 0.0);
      if (t > 0) {
        EXPECT_GE(p.Y[t], p.Y[t - 1]);  // non-negative rates
      }
    }
  }
}

TEST(Scenarios, IndependentOfWorkerCount) {
  const auto m = MarketParams::reference();
  const auto a = generate_scenarios(m, InflationParams::reference(), 37, 12, 6, 5, 1);
  const auto b = generate_scenarios(m, InflationParams::reference(), 37, 12, 6, 5, 7);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.Y, b.Y);
  EXPECT_EQ(a.r, b.r);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.I, b.I);
}

TEST(Scenarios, DeterministicMarketIsExact) {
  // r0 = r_inf with zero volatility keeps r constant; Y_t = e^{r t}.
  const auto m = alm::testing::flat_market(0.03, 0.0);
  const auto s = generate_scenarios(m, std::nullopt, 2, 5, 12, 1, 1);
  for (std::size_t t = 0; t <= 5; ++t) {
    EXPECT_NEAR(s.path(1).Y[t], std::exp(0.03 * t), 1e-13);
    EXPECT_NEAR(s.path(1).X[t], std::exp(0.03 * t), 1e-13);
  }
}

TEST(Scenarios, PathsCsvHasOneRowPerPathYear) {
  const auto s = generate_scenarios(MarketParams::reference(), std::nullopt, 3, 4, 2, 1, 1);
  std::stringstream buf;
  write_paths_csv(buf, s);
  std::string line;
  int lines = 0;
  while (std::getline(buf, line)) ++lines;
  EXPECT_EQ(lines, 1 + 3 * 5);
}

TEST(Scenarios, RejectsBadSizes) {
  const auto m = MarketParams::reference();
  EXPECT_THROW(generate_scenarios(m, std::nullopt, 0, 5, 1, 1), ValidationError);
  EXPECT_THROW(generate_scenarios(m, std::nullopt, 1, 0, 1, 1), ValidationError);
  EXPECT_THROW(generate_scenarios(m, std::nullopt, 1, 5, 0, 1), ValidationError);
}
