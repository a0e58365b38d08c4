#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

#include "numerics.hpp"

namespace lobqueue {

/// Standard normal CDF with full relative accuracy in both tails.
/// |x| < 2: Phi(x) = 1/2 + phi(x) sum_k x^{2k+1} / (2k+1)!!.
/// |x| >= 2: phi(x) times the Mills-ratio continued fraction
/// 1 / (x + 1 / (x + 2 / (x + 3 / ...))), evaluated from the back.
inline double normal_cdf(double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  const double ax = std::fabs(x);
  // exp(-x^2/2) with x^2 split so the rounding of x^2 does not enter
  const double hi = std::trunc(ax * 16.0) / 16.0;
  auto density = [&] { return inv_sqrt_2pi * std::exp(-0.5 * hi * hi) * std::exp(-0.5 * (ax - hi) * (ax + hi)); };
  if (ax < 2.0) {
    double term = x, sum = x;
    for (int k = 1; k < 100; ++k) {
      term *= x * x / (2 * k + 1);
      sum += term;
      if (std::fabs(term) < 1e-17 * std::fabs(sum)) break;
    }
    return 0.5 + density() * sum;
  }
  if (ax > 40.0) return x > 0.0 ? 1.0 : 0.0;
  const int terms = int(2000.0 / (ax * ax)) + 20;
  double r = ax;
  for (int k = terms; k >= 1; --k) r = ax + k / r;
  const double tail = density() / r;
  return x > 0.0 ? 1.0 - tail : tail;
}

inline double normal_sf(double x) { return normal_cdf(-x); }

/// log(exp(-x) I_nu(x)) for nu >= 0 and x >= 0. Large-argument expansion when
/// x >= max(30, nu^2/4) and it reaches full precision, power series otherwise.
inline double log_bessel_i_scaled(double nu, double x) {
  if (!(nu >= 0.0) || !(x >= 0.0)) throw std::domain_error("bessel_i: need nu >= 0 and x >= 0");
  if (x == 0.0) return nu == 0.0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (x >= std::fmax(30.0, 0.25 * nu * nu)) {
    const double mu = 4.0 * nu * nu;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 400; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double next = term * -(mu - odd * odd) / (double(k) * 8.0 * x);
      if (std::fabs(next) > std::fabs(term) && k > 0.5 * nu) break;  // past the smallest term
      term = next;
      sum += term;
      if (std::fabs(term) < 1e-17 * std::fabs(sum)) return std::log(sum) - 0.5 * std::log(2.0 * M_PI * x);
      if (term == 0.0) return std::log(sum) - 0.5 * std::log(2.0 * M_PI * x);
    }
  }
  const double q = 0.25 * x * x;
  double log_scale = nu * std::log(0.5 * x) - std::lgamma(nu + 1.0) - x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 10000000; ++k) {
    term *= q / (double(k) * (double(k) + nu));
    sum += term;
    if (sum > 1e250) {
      sum *= 1e-250;
      term *= 1e-250;
      log_scale += 250.0 * std::log(10.0);
    }
    if (term < 1e-17 * sum && double(k) > 0.5 * x) break;
  }
  return log_scale + std::log(sum);
}

/// Exponentially scaled modified Bessel function of the first kind,
/// exp(-x) I_nu(x), for nu >= 0 and x >= 0.
inline double bessel_i_scaled(double nu, double x) {
  if (x == 0.0 && nu >= 0.0) return nu == 0.0 ? 1.0 : 0.0;
  const double l = log_bessel_i_scaled(nu, x);
  return l < -745.0 ? 0.0 : std::exp(l);
}

/// log K_nu(x) for nu >= 0, x > 0, from K_nu(x) = int_0^inf exp(-x cosh u) cosh(nu u) du
/// evaluated relative to the peak of the integrand.
inline double log_bessel_k(double nu, double x) {
  if (!(nu >= 0.0) || !(x > 0.0)) throw std::domain_error("bessel_k: need nu >= 0 and x > 0");
  auto log_cosh = [](double y) {
    y = std::fabs(y);
    return y + std::log1p(std::exp(-2.0 * y)) - M_LN2;
  };
  // x cosh u - x, kept accurate for small u
  auto g = [&](double u) {
    const double s = std::sinh(0.5 * u);
    return -2.0 * x * s * s + log_cosh(nu * u);
  };
  double peak = 0.0;
  if (nu * nu > x) {
    double lo = 0.0, hi = std::asinh(nu / x) + 1e-12;
    for (int it = 0; it < 200 && hi - lo > 1e-14 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      if (nu * std::tanh(nu * mid) - x * std::sinh(mid) > 0.0)
        lo = mid;
      else
        hi = mid;
    }
    peak = 0.5 * (lo + hi);
  }
  const double gmax = g(peak);
  // the integrand is unimodal; find where it has dropped by e^-60 on each side
  auto edge = [&](double from, double dir) {
    double step = 0.5 / std::sqrt(1.0 + x + nu * nu);
    double u = from;
    while (true) {
      const double next = u + dir * step;
      if (next <= 0.0) return 0.0;
      if (g(next) < gmax - 60.0) return next;
      u = next;
      step *= 2.0;
    }
  };
  const double lo = edge(peak, -1.0), hi = edge(peak, 1.0);
  auto f = [&](double u) { return std::exp(g(u) - gmax); };
  // split at the peak so each piece is monotone
  double value = integrate(f, peak, hi, 1e-300, 1e-14).value;
  if (peak > lo) value += integrate(f, lo, peak, 1e-300, 1e-14).value;
  return gmax - x + std::log(value);
}

inline double bessel_i(double nu, double x) {
  const double s = bessel_i_scaled(nu, x);
  if (s == 0.0) return 0.0;
  if (x > 700.0) return std::exp(std::log(s) + x);
  return s * std::exp(x);
}

}  // namespace lobqueue
