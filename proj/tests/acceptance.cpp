// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include <lobqueue/lobqueue.hpp>

#include "ode_oracle.hpp"

using namespace lobqueue;

namespace {

constexpr std::uint64_t kSeed = 20261019;
int failures = 0;

void report(const char* id, const std::string& what, bool ok, const std::string& detail) {
  std::printf("%s %-58s %s  %s\n", id, what.c_str(), ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

bool all_passed(const std::vector<ExperimentReport>& rs, bool verbose = true) {
  bool ok = true;
  for (const auto& r : rs) {
    if (verbose) std::fputs(r.to_text().c_str(), stdout);
    ok = ok && r.passed();
  }
  return ok;
}

void ac1() {
  const auto p = baseline_params();
  const auto h = fluid_hitting_times(p);
  bool ok = std::fabs(h.tau_a - 200) < 1e-9 && std::fabs(h.tau_b - 250) < 1e-9 && std::fabs(h.tau_z - 100) < 1e-9 &&
            std::fabs(h.tau - 100) < 1e-9;
  Rk4Oracle<1> o;
  o.f = [&](double s, const std::array<double, 1>& z) {
    const double qb = 100.0 - 0.4 * s;
    return std::array<double, 1>{-(0.6 + 0.8 * z[0] / qb)};
  };
  double worst = 0.0;
  std::array<double, 1> z{100.0};
  for (int i = 1; i <= 99; ++i) {
    z = o.solve(z, i - 1.0, double(i));
    worst = std::max(worst, std::fabs(fluid_position(p, i) - z[0]) / std::max(1.0, std::fabs(z[0])));
  }
  ok = ok && worst < 1e-8;
  report("AC1", "fluid hitting times and position vs RK4", ok,
         fmt("tau_a=%.6g tau_b=%.6g tau_z=%.10g", h.tau_a, h.tau_b, h.tau_z) + fmt(" max rel err=%.2e", worst));
}

void ac2() {
  const auto rs = run_suite("fluid", true, kSeed, 1);
  report("AC2", "fluid limit: sup error decays with n", all_passed(rs), "");
}

void ac3() {
  const auto rs = run_suite("covariance", true, kSeed, 1);
  report("AC3", "flow covariance matches psi", all_passed(rs), "");
}

void ac4_ac5() {
  HittingExperimentConfig c;
  c.seed = kSeed;
  c.paths = 100000;
  c.survival_times = {0.1, 0.5, 1.0};
  const auto sym = hitting_probability_experiment(c);
  c.params = make_diffusion_params(Vec2(0, 0), 1, 1, 0, std::sqrt(3.0), 1);
  c.check_survival = false;
  auto third = hitting_probability_experiment(c);
  third.name = "hitting_probability_third";
  const bool p4 = sym.checks.front().pass && third.passed();
  std::fputs(sym.to_text().c_str(), stdout);
  std::fputs(third.to_text().c_str(), stdout);
  report("AC4", "price decrease probability: 1/2 and 1/3 cases", p4,
         fmt("freq=%.4f, %.4f", sym.checks.front().value, third.checks.front().value));

  // survival: symmetric zero drift from the run above, a correlated drifted case,
  // and the drift branch at mu = 0 against the zero-drift series
  bool p5 = sym.passed();
  HittingExperimentConfig d;
  d.seed = kSeed + 1;
  d.paths = 20000;
  d.survival_times = {0.1, 0.5, 1.0};
  d.params = make_diffusion_params(Vec2(-0.3, 0.1), 1.0, 1.3, 0.4, 1.0, 1.5);
  const auto drift = hitting_probability_experiment(d);
  std::fputs(drift.to_text().c_str(), stdout);
  p5 = p5 && drift.passed();
  double worst = 0.0;
  for (double rho : {0.0, 0.4, -0.5}) {
    const auto q = make_diffusion_params(Vec2(0, 0), 1.0, 1.3, rho, 1.0, 1.5);
    for (double t : {0.1, 0.5, 1.0})
      worst = std::max(worst, std::fabs(survival_with_drift(q, t).value - survival_zero_drift(q, t).value));
  }
  p5 = p5 && worst < 1e-6;
  report("AC5", "survival probability vs Monte Carlo", p5, fmt("drift branch at mu=0 max diff=%.2e", worst));
}

void ac6() {
  const auto rs = run_suite("tau", true, kSeed, 1);
  report("AC6", "execution time fluctuations: Gaussian limit", all_passed(rs), "");
}

void ac7() {
  const auto m = constant_marks({1, 1, 1, 1, 1, 1});
  bool ok = true;
  PoissonLogMgf g(1.0);
  const double l1 = legendre_point(g, VecX::Constant(1, 1.0)).value;
  const double l2 = legendre_point(g, VecX::Constant(1, 2.0)).value;
  ok = ok && std::fabs(l1) < 1e-12 && std::fabs(l2 - (2 * std::log(2.0) - 1)) < 1e-12;
  // convexity along random chords
  Rng rng(kSeed, stream_id(StreamTag::aux, 0));
  for (int k = 0; k < 1000 && ok; ++k) {
    Vec6 a, b;
    for (int j = 0; j < 6; ++j) {
      a[j] = 0.01 + 2 * rng.uniform();
      b[j] = 0.01 + 2 * rng.uniform();
    }
    const double s = rng.uniform();
    const double mid = poisson_iid_rate_density(m, 1.0, s * a + (1 - s) * b).value;
    ok = mid <= s * poisson_iid_rate_density(m, 1.0, a).value + (1 - s) * poisson_iid_rate_density(m, 1.0, b).value +
                    1e-10;
  }
  double gap = 0.0;
  for (const Vec2& y : {Vec2(0, 0), Vec2(-0.5, 0.2), Vec2(0.7, -0.9), Vec2(-1.5, -1.5)})
    gap = std::max(gap, std::fabs(segment_rate(m, 1.0, y).gap));
  ok = ok && gap < 1e-8;
  // brute force over flows with A x = 0 on a 0.05 grid
  const int n = 61;
  std::vector<double> cost(2 * n);
  for (int i = 0; i < 2 * n; ++i) {
    const double x = i * 0.05;
    cost[i] = (x > 0 ? x * std::log(6 * x) : 0.0) - x + 1.0 / 6;
  }
  double best = 1e300;
  for (int i2 = 0; i2 < n; ++i2)
    for (int i3 = 0; i3 < n; ++i3)
      for (int i5 = 0; i5 < n; ++i5)
        for (int i6 = 0; i6 < n; ++i6)
          best = std::min(best, cost[i2 + i3] + cost[i2] + cost[i3] + cost[i5 + i6] + cost[i5] + cost[i6]);
  const double rate = segment_rate(m, 1.0, Vec2(0, 0)).rate;
  ok = ok && std::fabs(rate - best) < 2e-2;
  report("AC7", "large deviations: Legendre, duality, grid oracle", ok,
         fmt("rate=%.6f grid=%.6f gap=%.1e", rate, best, gap));
}

void ac8() {
  const auto rs = run_suite("lemma", true, kSeed, 1);
  report("AC8", "order position never exceeds bid queue", all_passed(rs), "");
}

void ac9() {
  const auto rs = run_suite("example1", true, kSeed, 1);
  report("AC9", "Example 1: E[Y^2] near e^5, not e^3", all_passed(rs), "");
}

void ac10() {
  double worst = 0.0;
  for (double nu = 0.0; nu <= 40.0; nu += 0.25)
    for (double lx = -3.0; lx <= 2.0; lx += 0.05) {
      const double x = std::pow(10.0, lx);
      // I_nu - I_{nu+2} = 2 (nu + 1) / x I_{nu+1}, all exponentially scaled
      const double rhs = 2.0 * (nu + 1) / x * bessel_i_scaled(nu + 1, x);
      if (rhs < 1e-280) continue;
      const double lhs = bessel_i_scaled(nu, x) - bessel_i_scaled(nu + 2, x);
      worst = std::max(worst, std::fabs(lhs / rhs - 1.0));
    }
  double phi = 0.0;
  for (double x = -30.0; x <= 8.0; x += 0.01) {
    const double ref = 0.5 * std::erfc(-x / std::sqrt(2.0));
    phi = std::max(phi, std::fabs(normal_cdf(x) - ref) / ref);
  }
  report("AC10", "special functions: Bessel recurrence, normal cdf", worst < 1e-10 && phi < 1e-12,
         fmt("recurrence=%.1e cdf=%.1e", worst, phi));
}

}  // namespace

int main() {
  std::setvbuf(stdout, nullptr, _IONBF, 0);
  ac1();
  ac2();
  ac3();
  ac4_ac5();
  ac6();
  ac7();
  ac8();
  ac9();
  ac10();
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
