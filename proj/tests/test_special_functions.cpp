#include <gtest/gtest.h>

#include <cmath>

#include <lobqueue/numerics.hpp>
#include <lobqueue/special_functions.hpp>

using namespace lobqueue;

TEST(NormalCdf, MatchesErfcIdentity) {
  for (double x = -38.0; x <= 9.0; x += 0.0137) {
    const double ref = 0.5 * std::erfc(-x / std::sqrt(2.0));
    EXPECT_NEAR(normal_cdf(x), ref, 1e-12) << x;
  }
  EXPECT_DOUBLE_EQ(normal_cdf(0.0), 0.5);
  EXPECT_NEAR(normal_sf(1.0) + normal_cdf(1.0), 1.0, 1e-15);
}

TEST(NormalCdf, RelativeLowerTail) {
  for (double x = -30.0; x <= 0.0; x += 0.0113) {
    const double ref = 0.5 * std::erfc(-x / std::sqrt(2.0));
    EXPECT_NEAR(normal_cdf(x) / ref, 1.0, 1e-12) << x;
  }
}

TEST(BesselI, ReferenceValues) {
  // exp(-x) I_nu(x) from a 30-digit evaluation
  struct Row { double nu, x, v; };
  const Row rows[] = {{0, 1, 0.4657596075936404365},       {1, 1, 0.20791041534970844887},
                      {2.5, 3, 0.075444308632476116495},   {10, 30, 0.013646390946186456687},
                      {40, 100, 0.000014291436336308280118}, {0.5, 1e-3, 0.025206110707457800594},
                      {7, 50, 0.034507164782405599718}};
  for (const auto& r : rows) EXPECT_NEAR(bessel_i_scaled(r.nu, r.x) / r.v, 1.0, 1e-11) << r.nu << " " << r.x;
}

TEST(BesselI, EdgeCases) {
  EXPECT_EQ(bessel_i_scaled(0.0, 0.0), 1.0);
  EXPECT_EQ(bessel_i_scaled(2.0, 0.0), 0.0);
  EXPECT_THROW(bessel_i_scaled(-1.0, 1.0), std::domain_error);
  EXPECT_THROW(bessel_i_scaled(1.0, -1.0), std::domain_error);
  // small argument: I_nu(x) ~ (x/2)^nu / Gamma(nu+1)
  EXPECT_NEAR(bessel_i(3.0, 1e-3) / (std::pow(5e-4, 3) / 6.0), 1.0, 1e-6);
}

TEST(BesselI, RecurrenceAcrossSwitch) {
  // I_{nu-1} - I_{nu+1} = (2 nu / x) I_nu on both sides of the large-argument switch
  for (double nu = 1.0; nu <= 40.0; nu += 0.75)
    for (double x : {1e-3, 0.3, 4.0, 29.9, 30.1, 70.0, 99.0, 100.0}) {
      const double lhs = bessel_i_scaled(nu - 1, x) - bessel_i_scaled(nu + 1, x);
      const double rhs = 2.0 * nu / x * bessel_i_scaled(nu, x);
      if (rhs < 1e-280) continue;
      EXPECT_NEAR(lhs / rhs, 1.0, 1e-10) << nu << " " << x;
    }
}

TEST(BesselK, ReferenceAndWronskian) {
  EXPECT_NEAR(log_bessel_k(0, 1), -0.8650643989067880968, 1e-13);
  EXPECT_NEAR(log_bessel_k(1, 2), -1.9670713025605138915, 1e-13);
  EXPECT_NEAR(log_bessel_k(3.3, 0.7), 3.706077398089767767, 1e-12);
  EXPECT_NEAR(log_bessel_k(20, 5), 19.994906008486834148, 1e-12);
  // I_nu K_{nu+1} + I_{nu+1} K_nu = 1/x
  for (double nu : {0.0, 0.5, 2.0, 7.3, 15.0})
    for (double x : {0.2, 1.0, 6.0, 40.0}) {
      const double w = std::exp(log_bessel_i_scaled(nu, x) + x + log_bessel_k(nu + 1, x)) +
                       std::exp(log_bessel_i_scaled(nu + 1, x) + x + log_bessel_k(nu, x));
      EXPECT_NEAR(w * x, 1.0, 1e-11) << nu << " " << x;
    }
}

TEST(Quadrature, KnownIntegrals) {
  auto r = integrate([](double x) { return std::sin(x); }, 0.0, M_PI);
  EXPECT_NEAR(r.value, 2.0, 1e-12);
  auto g = integrate_to_infinity([](double x) { return std::exp(-x * x); }, 0.0);
  EXPECT_NEAR(g.value, std::sqrt(M_PI) / 2.0, 1e-10);
  const auto& gl = gauss_legendre(12);
  double s = 0.0;
  for (std::size_t i = 0; i < gl.x.size(); ++i) s += gl.w[i] * std::pow(gl.x[i], 10);
  EXPECT_NEAR(s, 2.0 / 11.0, 1e-14);
}

TEST(RootAndOde, Basics) {
  EXPECT_NEAR(find_root([](double x) { return x * x - 2.0; }, 0.0, 2.0), std::sqrt(2.0), 1e-12);
  EXPECT_THROW(find_root([](double x) { return x * x + 1.0; }, 0.0, 2.0), std::domain_error);
  DormandPrince ode;
  auto res = ode.solve([](double, const std::vector<double>& y, std::vector<double>& dy) { dy[0] = -y[0]; }, 0.0,
                       {1.0}, 2.0);
  EXPECT_NEAR(res.y[0], std::exp(-2.0), 1e-10);
  auto hit = ode.solve([](double, const std::vector<double>&, std::vector<double>& dy) { dy[0] = -1.0; }, 0.0, {1.0},
                       5.0, [](double, const std::vector<double>& y) { return y[0]; });
  EXPECT_TRUE(hit.event);
  EXPECT_NEAR(hit.t, 1.0, 1e-10);
}
