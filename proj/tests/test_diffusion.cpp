#include <gtest/gtest.h>

#include <cmath>

#include <lobqueue/diffusion.hpp>

using namespace lobqueue;

namespace {
// One-dimensional Brownian motion with drift m and unit variance started at q > 0:
// survival and first-passage density of level 0.
double bm_survival(double q, double m, double t) {
  const double s = std::sqrt(t);
  auto Phi = [](double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); };
  return Phi((q + m * t) / s) - std::exp(-2.0 * m * q) * Phi((-q + m * t) / s);
}
double bm_density(double q, double m, double t) {
  return q / std::sqrt(2.0 * M_PI * t * t * t) * std::exp(-(q + m * t) * (q + m * t) / (2.0 * t));
}
// composite Simpson on [a, b]
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}
}  // namespace

TEST(DiffusionParams, Geometry) {
  const auto d = make_diffusion_params(Vec2(0, 0), 2.0, 3.0, 0.0, 1.0, 4.0);
  EXPECT_NEAR(d.alpha, M_PI / 2, 1e-15);
  EXPECT_NEAR(d.theta0, std::atan((4.0 / 3.0) / (1.0 / 2.0)), 1e-15);
  const auto s = make_diffusion_params(Vec2(0, 0), 1.5, 1.5, 0.0, 2.0, 2.0);
  EXPECT_NEAR(s.theta0, M_PI / 4, 1e-15);
  EXPECT_NEAR(s.r0, std::sqrt(2.0) * 2.0 / 1.5, 1e-14);
  // whitened start has polar coordinates (r0, theta0)
  for (double rho : {-0.6, 0.0, 0.45}) {
    const auto d2 = make_diffusion_params(Vec2(0, 0), 1.0, 1.3, rho, 1.0, 1.5);
    const Vec2 w = d2.start_whitened();
    EXPECT_NEAR(w.norm(), d2.r0, 1e-13);
    EXPECT_NEAR(std::atan2(w[1], w[0]), d2.theta0, 1e-13);
    EXPECT_GT(d2.theta0, 0.0);
    EXPECT_LT(d2.theta0, d2.alpha);
    EXPECT_LT((d2.sigma() * d2.sigma().transpose() - d2.cov).norm(), 1e-14);
    EXPECT_LT((d2.sigma() * d2.sigma_inverse() - Mat2::Identity()).norm(), 1e-14);
  }
  EXPECT_THROW(make_diffusion_params(Vec2(0, 0), 1, 1, 1.0, 1, 1), std::invalid_argument);
}

TEST(DiffusionParams, DerivedFromFlows) {
  // vbar1 = vbar2 + vbar3 and vbar4 = vbar5 + vbar6 gives zero drift
  Vec6 v;
  v << 0.5, 0.2, 0.3, 0.6, 0.25, 0.35;
  const auto m = flow_moments(marks_for_mean(v), 1.0, 1.0);
  const auto d = derive_diffusion_params(m, 1.0, 1.0);
  EXPECT_LT(d.mu.norm(), 1e-15);
  const Mat2 cov = queue_map() * m.psi * queue_map().transpose();
  EXPECT_NEAR(d.sigma1 * d.sigma1, cov(0, 0), 1e-14);
  EXPECT_NEAR(d.sigma2 * d.sigma2, cov(1, 1), 1e-14);
  EXPECT_NEAR(d.rho, cov(0, 1) / (d.sigma1 * d.sigma2), 1e-14);
  // a single order type gives a singular queue covariance
  const auto single = flow_moments(constant_marks({1, 1, 1, 1, 1, 1}, {1, 0, 0, 0, 0, 0}), 1.0, 1.0);
  try {
    derive_diffusion_params(single, 1.0, 1.0);
    FAIL() << "expected a positive-definiteness error";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("eigenvalue"), std::string::npos);
  }
}

TEST(Survival, IndependentCoordinatesZeroDrift) {
  const auto d = make_diffusion_params(Vec2(0, 0), 1.0, 1.0, 0.0, 1.0, 1.0);
  for (double t : {0.1, 0.5, 1.0, 3.0}) {
    const double exact = bm_survival(1.0, 0.0, t) * bm_survival(1.0, 0.0, t);
    EXPECT_NEAR(survival_probability(d, t).value, exact, 1e-10) << t;
  }
  const auto a = make_diffusion_params(Vec2(0, 0), 1.0, 2.0, 0.0, 0.7, 3.0);
  for (double t : {0.2, 2.0})
    EXPECT_NEAR(survival_probability(a, t).value, bm_survival(0.7, 0.0, t) * bm_survival(1.5, 0.0, t), 1e-10);
}

TEST(Survival, IndependentCoordinatesWithDrift) {
  // mu = (-0.3, 0.1), sigma = (1, 1.3), rho = 0
  const auto d = make_diffusion_params(Vec2(-0.3, 0.1), 1.0, 1.3, 0.0, 1.0, 1.5);
  for (double t : {0.3, 1.0, 4.0}) {
    const double exact = bm_survival(1.0, -0.3, t) * bm_survival(1.5 / 1.3, 0.1 / 1.3, t);
    EXPECT_NEAR(survival_probability(d, t).value, exact, 1e-8) << t;
  }
  EXPECT_TRUE(survival_probability(d, 1.0).sub_probability);
}

TEST(Survival, Limits) {
  const auto d = make_diffusion_params(Vec2(0, 0), 1.0, 1.0, 0.3, 1.0, 2.0);
  EXPECT_GT(survival_probability(d, 1e-6 * d.r0 * d.r0).value, 1.0 - 1e-6);
  double prev = 1.0;
  for (int i = 0; i < 50; ++i) {
    const double t = std::pow(10.0, -3.0 + 5.0 * i / 49.0);
    const double p = survival_probability(d, t).value;
    EXPECT_LE(p, prev + 1e-12);
    EXPECT_GE(p, 0.0);
    prev = p;
  }
  EXPECT_THROW(survival_probability(d, 0.0), std::invalid_argument);
}

TEST(Survival, DriftBranchAtZeroDrift) {
  for (double rho : {0.0, -0.4, 0.5}) {
    const auto d = make_diffusion_params(Vec2(0, 0), 1.0, 1.2, rho, 1.0, 0.8);
    for (double t : {0.1, 0.5, 1.0})
      EXPECT_NEAR(survival_with_drift(d, t).value, survival_zero_drift(d, t).value, 1e-6);
  }
}

TEST(Survival, ToleranceStability) {
  const auto d = make_diffusion_params(Vec2(-0.2, 0.1), 1.0, 1.0, 0.3, 1.0, 1.0);
  const double a = survival_probability(d, 0.7, 1e-8).value;
  const double b = survival_probability(d, 0.7, 1e-13).value;
  EXPECT_NEAR(a, b, 1e-7);
}

TEST(PriceDecrease, ZeroDrift) {
  const auto s = make_diffusion_params(Vec2(0, 0), 1.0, 1.0, 0.0, 1.0, 1.0);
  EXPECT_DOUBLE_EQ(price_decrease_probability(s).value, 0.5);
  const auto third = make_diffusion_params(Vec2(0, 0), 1.0, 1.0, 0.0, std::sqrt(3.0), 1.0);
  EXPECT_NEAR(price_decrease_probability(third).value, 1.0 / 3, 1e-15);
  // swapping sides gives the complement
  const auto d = make_diffusion_params(Vec2(0, 0), 1.0, 1.4, 0.35, 1.0, 2.0);
  const auto e = make_diffusion_params(Vec2(0, 0), 1.4, 1.0, 0.35, 2.0, 1.0);
  EXPECT_NEAR(price_decrease_probability(d).value + price_decrease_probability(e).value, 1.0, 1e-15);
}

TEST(PriceDecrease, IndependentCoordinatesWithDrift) {
  // P(bid side first) = int f_b(t) S_a(t) dt for independent coordinates
  struct Case { double mb, ma, s2, qb, qa; };
  for (const auto& c : {Case{-0.3, 0.1, 1.3, 1.0, 1.5}, Case{-0.1, -0.1, 1.0, 1.0, 1.0}, Case{-0.5, -0.8, 1.0, 1.2, 0.9}}) {
    const auto d = make_diffusion_params(Vec2(c.mb, c.ma), 1.0, c.s2, 0.0, c.qb, c.qa);
    auto integrand = [&](double u) {
      // t = u^2 / (1 - u)^2 maps (0, 1) to (0, inf)
      if (u <= 0.0 || u >= 1.0) return 0.0;
      const double t = u * u / ((1 - u) * (1 - u));
      const double jac = 2 * u / std::pow(1 - u, 3);
      return bm_density(c.qb, c.mb, t) * bm_survival(c.qa / c.s2, c.ma / c.s2, t) * jac;
    };
    const double exact = simpson(integrand, 0.0, 1.0, 200000);
    EXPECT_NEAR(price_decrease_probability(d).value, exact, 1e-7) << c.mb << " " << c.ma;
  }
}

TEST(PriceDecrease, NearZeroDriftContinuity) {
  const auto d = make_diffusion_params(Vec2(-1e-7, -1e-7), 1.0, 1.0, 0.0, 1.7, 1.0);
  EXPECT_NEAR(price_decrease_probability(d).value, d.theta0 / d.alpha, 1e-6);
}

TEST(Fluctuations, ExecutionTail) {
  EXPECT_DOUBLE_EQ(execution_time_fluct_cdf(0.6, 13.0, 0.0), 0.5);
  EXPECT_NEAR(execution_time_fluct_cdf(0.6, 13.0, -1e4), 1.0, 1e-15);
  EXPECT_NEAR(execution_time_fluct_cdf(0.6, 13.0, 1e4), 0.0, 1e-15);
  EXPECT_THROW(execution_time_fluct_cdf(0.0, 1.0, 0.0), std::invalid_argument);
}

TEST(Fluctuations, DepletionTail) {
  FluidParams f = baseline_params();
  Mat6 psi = Mat6::Zero();
  psi(0, 0) = psi(1, 1) = psi(2, 2) = 1.0 / 6;
  psi(3, 3) = psi(4, 4) = psi(5, 5) = 1.0 / 6;
  EXPECT_DOUBLE_EQ(depletion_time_fluct_cdf(Side::bid, f, psi, 0.0), 0.5);
  const double displayed = depletion_time_fluct_cdf(Side::bid, f, psi, -1.0, DepletionScale::displayed);
  EXPECT_NEAR(displayed, 1.0 - 0.5 * std::erfc(std::sqrt(80.0) / std::sqrt(2.0)), 1e-15);
  // corrected scale: sd = sqrt(q phi / (lambda v)) / (lambda v)
  EXPECT_NEAR(depletion_time_sd(Side::bid, f, psi), std::sqrt(100 * 0.5 / 0.4) / 0.4, 1e-12);
  f.vbar[0] = 2.0;
  EXPECT_THROW(depletion_time_fluct_cdf(Side::bid, f, psi, 0.0), std::invalid_argument);
}

TEST(Fluctuations, VarianceQuadrature) {
  // reference values from the kernel form (tests/oracles/sigma_y.py)
  const auto f = baseline_params();
  const auto m = flow_moments(marks_for_mean(f.vbar), 1.0, 1.0);
  EXPECT_EQ(fluctuation_variance(f, m, 0.0), 0.0);
  EXPECT_EQ(fluctuation_variance(f, m, 0.0, VarianceMode::closed_form), 0.0);
  const std::pair<double, double> ref[] = {
      {10.0, 56.18228954}, {50.0, 200.852011}, {90.0, 198.9847904}, {99.0, 179.2081066}};
  for (const auto& [t, v] : ref) EXPECT_NEAR(fluctuation_variance(f, m, t) / v, 1.0, 1e-8) << t;
  // small t: sigma_Y^2 ~ (psi22 + 2 psi23 + psi33) t
  const double slope = m.psi(1, 1) + 2 * m.psi(1, 2) + m.psi(2, 2);
  EXPECT_NEAR(fluctuation_variance(f, m, 1e-3) / (slope * 1e-3), 1.0, 1e-2);
  EXPECT_THROW(fluctuation_variance(f, m, 101.0), std::invalid_argument);
}

TEST(Fluctuations, ClosedFormBranches) {
  const auto f = baseline_params();
  const auto m = flow_moments(marks_for_mean(f.vbar), 1.0, 1.0);
  const double cf = fluctuation_variance(f, m, 50.0, VarianceMode::closed_form);
  EXPECT_TRUE(std::isfinite(cf));
  EXPECT_GT(cf, 0.0);
  FluidParams zero = f;
  zero.vbar[0] = 1.4;  // c = 0
  EXPECT_THROW(fluctuation_variance(zero, m, 10.0, VarianceMode::closed_form), std::invalid_argument);
  EXPECT_NO_THROW(fluctuation_variance(zero, m, 10.0, VarianceMode::quadrature));
}
