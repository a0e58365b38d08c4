#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include <lobqueue/point_processes.hpp>
#include <lobqueue/rng.hpp>
#include <lobqueue/statistics.hpp>

using namespace lobqueue;

TEST(Philox, KnownAnswers) {
  auto a = philox4x32_10({0, 0, 0, 0}, {0, 0});
  EXPECT_EQ(a[0], 0x6627e8d5u);
  EXPECT_EQ(a[1], 0xe169c58du);
  EXPECT_EQ(a[2], 0xbc57ac4cu);
  EXPECT_EQ(a[3], 0x9b00dbd8u);
  auto b = philox4x32_10({~0u, ~0u, ~0u, ~0u}, {~0u, ~0u});
  EXPECT_EQ(b[0], 0x408f276du);
  EXPECT_EQ(b[3], 0x6d5451fdu);
  auto c = philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0});
  EXPECT_EQ(c[0], 0xd16cfe09u);
  EXPECT_EQ(c[1], 0x94fdccebu);
  EXPECT_EQ(c[2], 0x5001e420u);
  EXPECT_EQ(c[3], 0x24126ea1u);
}

TEST(Rng, StreamsDifferAndRepeat) {
  Rng a(5, 1), b(5, 1), c(5, 2);
  EXPECT_EQ(a.uniform(), b.uniform());
  EXPECT_NE(a.uniform(), c.uniform());
}

TEST(Rng, DistributionMoments) {
  Rng r(9, 0);
  const int n = 200000;
  std::vector<double> g(n), p(n), e(n);
  for (int i = 0; i < n; ++i) {
    g[i] = r.gamma(2.5, 2.0);
    p[i] = double(r.poisson(40.0));
    e[i] = r.exponential(4.0);
  }
  EXPECT_NEAR(mean(g), 1.25, 5 * std::sqrt(2.5 / 4.0 / n));
  EXPECT_NEAR(variance(g), 0.625, 0.02);
  EXPECT_NEAR(mean(p), 40.0, 5 * std::sqrt(40.0 / n));
  EXPECT_NEAR(variance(p), 40.0, 1.0);
  EXPECT_NEAR(mean(e), 0.25, 5 * 0.25 / std::sqrt(n));
}

TEST(Arrivals, RatesAndVariances) {
  EXPECT_EQ(stationary_rate(Poisson{3.0}), 3.0);
  EXPECT_DOUBLE_EQ(stationary_rate(HawkesExp{1.0, 0.5, 1.0}), 2.0);
  EXPECT_DOUBLE_EQ(stationary_rate(CoxShotNoise{1.0, 2.0, 1.0, 2.0}), 2.0);
  EXPECT_EQ(clt_variance(Poisson{1.0}), 1.0);
  EXPECT_DOUBLE_EQ(clt_variance(HawkesExp{1.0, 0.5, 1.0}), 8.0);
  // the two readings of the shot-noise term
  EXPECT_DOUBLE_EQ(clt_variance(CoxShotNoise{1.0, 2.0, 1.0, 2.0}, CoxVarianceForm::mass_of_square), 2.5);
  EXPECT_DOUBLE_EQ(clt_variance(CoxShotNoise{1.0, 2.0, 1.0, 2.0}, CoxVarianceForm::squared_mass), 2.5);
  EXPECT_DOUBLE_EQ(clt_variance(CoxShotNoise{1.0, 1.0, 2.0, 1.0}, CoxVarianceForm::squared_mass), 1.0 + 2.0 + 4.0);
  EXPECT_THROW(stationary_rate(LinearStateDependent{1.0, 0.1, 0.1}), std::invalid_argument);
  EXPECT_THROW(clt_variance(LinearStateDependent{1.0, 0.1, 0.1}), std::invalid_argument);
}

TEST(Arrivals, Validation) {
  EXPECT_THROW(validate(ArrivalSpec{HawkesExp{1.0, 1.0, 1.0}}), std::invalid_argument);
  EXPECT_THROW(validate(ArrivalSpec{Poisson{0.0}}), std::invalid_argument);
  EXPECT_THROW(simulate_arrivals(Poisson{1.0}, -1.0, 1), std::invalid_argument);
  EXPECT_TRUE(simulate_arrivals(Poisson{1.0}, 0.0, 1).times.empty());
}

TEST(Arrivals, PoissonCountsAndBlocks) {
  const auto ev = simulate_arrivals(Poisson{1.0}, 1e5, 42);
  EXPECT_NEAR(double(ev.times.size()), 1e5, 4 * std::sqrt(1e5));
  for (std::size_t i = 1; i < ev.times.size(); ++i) ASSERT_LT(ev.times[i - 1], ev.times[i]);
  std::vector<double> blocks(100000, 0.0);
  for (double t : ev.times) blocks[std::min<std::size_t>(std::size_t(t), blocks.size() - 1)] += 1.0;
  EXPECT_NEAR(variance(blocks), 1.0, 0.05);
  const auto again = simulate_arrivals(Poisson{1.0}, 1e5, 42);
  EXPECT_EQ(ev.times, again.times);
}

TEST(Arrivals, HawkesLongRunRate) {
  const HawkesExp h{1.0, 0.5, 1.0};
  const double T = 1e5;
  const auto ev = simulate_arrivals(h, T, 7);
  // Var N(T) ~ vd2 T with vd2 = 8
  EXPECT_NEAR(double(ev.times.size()) / T, 2.0, 3 * std::sqrt(8.0 / T));
}

TEST(Arrivals, HawkesBlockVariance) {
  // block counts over long blocks have variance ~ vd2 * length
  const HawkesExp h{1.0, 0.5, 1.0};
  const double L = 50.0;
  const int blocks = 4000;
  const auto ev = simulate_arrivals(h, L * blocks, 8);
  std::vector<double> counts(blocks, 0.0);
  for (double t : ev.times) counts[std::min(int(t / L), blocks - 1)] += 1.0;
  // finite-block correction for the exponential kernel is O(1/(L (b-a))) relative
  EXPECT_NEAR(variance(counts) / L, 8.0, 0.8);
}

TEST(Arrivals, CoxLongRunRate) {
  const CoxShotNoise c{1.0, 2.0, 1.0, 2.0};
  const double T = 1e5;
  const auto ev = simulate_arrivals(c, T, 9);
  EXPECT_NEAR(double(ev.times.size()) / T, 2.0, 4 * std::sqrt(2.5 / T));
}

TEST(Arrivals, LinearReducesToPoisson) {
  const auto a = simulate_arrivals(LinearStateDependent{1.0, 0.0, 0.0}, 100.0, 3);
  const auto b = simulate_arrivals(Poisson{1.0}, 100.0, 3);
  EXPECT_EQ(a.times, b.times);
  // with state feedback the rate rises with the queue sizes
  const auto c = simulate_arrivals(LinearStateDependent{1.0, 1.0, 1.0}, 1000.0, 3, 0,
                                   [] { return QueueState{1.0, 1.0}; });
  EXPECT_NEAR(double(c.times.size()) / 1000.0, 3.0, 0.3);
}

TEST(Arrivals, CsvFormat) {
  std::ostringstream os;
  write_event_csv(os, {0.1, 2.0});
  EXPECT_EQ(os.str(), "time\n0.10000000000000001\n2\n");
}

TEST(Arrivals, CoxBlockVarianceSelectsForm) {
  // nu=1, rho=1, kappa=2, delta=1: the two forms give 7 and 5
  const CoxShotNoise c{1.0, 1.0, 2.0, 1.0};
  const double L = 100.0;
  const int blocks = 3000;
  const auto ev = simulate_arrivals(c, L * blocks, 10);
  std::vector<double> counts(blocks, 0.0);
  for (double t : ev.times) counts[std::min(int(t / L), blocks - 1)] += 1.0;
  const double v = variance(counts) / L;
  EXPECT_NEAR(v, clt_variance(c, CoxVarianceForm::squared_mass), 0.7);
  EXPECT_GT(std::fabs(v - clt_variance(c, CoxVarianceForm::mass_of_square)), 1.0);
}
