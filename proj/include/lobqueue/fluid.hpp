#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "lob_simulator.hpp"
#include "numerics.hpp"
#include "order_flow.hpp"

namespace lobqueue {

struct FluidParams {
  double lambda = 1.0;
  Vec6 vbar = Vec6::Zero();
  double qb = 1.0, qa = 1.0, z = 1.0;
};

/// Baseline regime used throughout the tests and examples.
inline FluidParams baseline_params() {
  FluidParams p;
  p.lambda = 1.0;
  p.vbar << 1.0, 0.6, 0.8, 1.0, 0.7, 0.8;
  p.qb = p.qa = p.z = 100.0;
  return p;
}

inline void validate(const FluidParams& p) {
  if (!(p.lambda > 0.0)) throw std::invalid_argument("invalid fluid parameters: lambda must be positive");
  if (!(p.qb > 0.0) || !(p.qa > 0.0) || !(p.z > 0.0)) throw std::invalid_argument("invalid fluid parameters: initial state must be positive");
  if (p.z > p.qb) throw std::invalid_argument("invalid fluid parameters: z must not exceed qb");
  for (int j = 0; j < 6; ++j)
    if (!(p.vbar[j] >= 0.0)) throw std::invalid_argument("invalid fluid parameters: mean marks must be nonnegative");
}

struct FluidConstants {
  double vb, va;      ///< net depletion speeds per unit rate
  double a, b, c;     ///< Z' = -a - Z/(b + c t)
  bool cancellations; ///< vbar_3 > 0, so that (b, c) are defined
};

inline FluidConstants fluid_constants(const FluidParams& p) {
  FluidConstants k{};
  k.vb = -p.vbar[0] + p.vbar[1] + p.vbar[2];
  k.va = -p.vbar[3] + p.vbar[4] + p.vbar[5];
  k.a = p.lambda * p.vbar[1];
  k.cancellations = p.vbar[2] > 0.0;
  if (k.cancellations) {
    k.b = p.qb / (p.lambda * p.vbar[2]);
    k.c = -k.vb / p.vbar[2];
  } else {
    k.b = kInf;
    k.c = 0.0;
  }
  return k;
}

struct HittingTimes {
  double tau_a = kInf, tau_b = kInf, tau_z = kInf, tau = kInf;
};

namespace detail {

enum class ZBranch { general, minus_one, zero };

inline ZBranch z_branch(double c) {
  if (std::fabs(c) < 1e-8) return ZBranch::zero;
  if (std::fabs(c + 1.0) < 1e-8) return ZBranch::minus_one;
  return ZBranch::general;
}

/// Closed-form Z on the branch selected by c, without freezing.
inline double z_closed(double a, double b, double c, double z, double t, ZBranch br) {
  switch (br) {
    case ZBranch::zero: return (z + a * b) * std::exp(-t / b) - a * b;
    case ZBranch::minus_one: return (a * std::log1p(-t / b) + z / b) * (b - t);
    default: {
      const double u = b + c * t;
      return -a / (1.0 + c) * u + (z + a * b / (1.0 + c)) * std::pow(b / u, 1.0 / c);
    }
  }
}

inline double tau_z_closed(double a, double b, double c, double z, ZBranch br) {
  switch (br) {
    case ZBranch::zero: return b * std::log(z / (a * b) + 1.0);
    case ZBranch::minus_one: return b * (1.0 - std::exp(-z / (a * b)));
    default: {
      const double base = (1.0 + c) * z / a + b;
      if (!(base > 0.0)) return std::numeric_limits<double>::quiet_NaN();
      return std::pow(base, c / (c + 1.0)) * std::pow(b, 1.0 / (c + 1.0)) / c - b / c;
    }
  }
}

}  // namespace detail

inline HittingTimes fluid_hitting_times(const FluidParams& p) {
  validate(p);
  const auto k = fluid_constants(p);
  HittingTimes h;
  if (k.va > 0.0) h.tau_a = p.qa / (p.lambda * k.va);
  if (k.vb > 0.0) h.tau_b = p.qb / (p.lambda * k.vb);
  if (!k.cancellations) {
    h.tau_z = k.a > 0.0 ? p.z / k.a : kInf;
  } else if (k.a == 0.0) {
    // Z = z (b/(b+ct))^(1/c) only vanishes together with Q^b
    h.tau_z = h.tau_b;
  } else {
    const double root = detail::tau_z_closed(k.a, k.b, k.c, p.z, detail::z_branch(k.c));
    h.tau_z = (std::isfinite(root) && root > 0.0) ? std::min(root, h.tau_b) : h.tau_b;
  }
  h.tau = std::min({h.tau_a, h.tau_b, h.tau_z});
  return h;
}

/// (Q^b(t), Q^a(t)), frozen at tau.
inline std::pair<double, double> fluid_queues(const FluidParams& p, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("fluid_queues: t must be nonnegative");
  const auto k = fluid_constants(p);
  const double s = std::min(t, fluid_hitting_times(p).tau);
  return {p.qb - p.lambda * k.vb * s, p.qa - p.lambda * k.va * s};
}

/// Z(t) from the closed form, frozen at tau.
inline double fluid_position(const FluidParams& p, double t) {
  if (!(t >= 0.0)) throw std::invalid_argument("fluid_position: t must be nonnegative");
  const auto k = fluid_constants(p);
  const auto h = fluid_hitting_times(p);
  const double s = std::min(t, h.tau);
  if (!k.cancellations) return p.z - k.a * s;
  if (s == h.tau_z) return 0.0;
  return detail::z_closed(k.a, k.b, k.c, p.z, s, detail::z_branch(k.c));
}

/// Closed form evaluated on an explicitly chosen branch (for continuity checks).
inline double fluid_position_branch(double a, double b, double c, double z, double t, int branch) {
  const auto br = branch == 0 ? detail::ZBranch::zero
                  : branch == -1 ? detail::ZBranch::minus_one
                                 : detail::ZBranch::general;
  return detail::z_closed(a, b, c, z, t, br);
}

struct GeneralPositionResult {
  double z = 0.0;
  double tau_z = kInf;  ///< first time Z reaches 0 (infinite if not before min(tau_a, tau_b))
  double tau = kInf;
};

/// Z(t) for a general cancellation profile by integrating
/// Z' = -lambda (vbar_2 + vbar_3 profile(Z / Q^b)).
inline GeneralPositionResult fluid_position_general_full(const FluidParams& p, const CancellationRule& rule, double t) {
  validate(p);
  if (!(t >= 0.0)) throw std::invalid_argument("fluid_position_general: t must be nonnegative");
  const auto k = fluid_constants(p);
  const auto h = fluid_hitting_times(p);
  const double queue_stop = std::min(h.tau_a, h.tau_b);
  DormandPrince ode;
  ode.event_tol = 1e-12;
  auto rhs = [&](double s, const std::vector<double>& y, std::vector<double>& dy) {
    const double qb = p.qb - p.lambda * k.vb * s;
    const double ratio = qb > 0.0 ? y[0] / qb : 1.0;
    dy[0] = -p.lambda * (p.vbar[1] + p.vbar[2] * rule(ratio));
  };
  auto event = [](double, const std::vector<double>& y) { return y[0]; };
  GeneralPositionResult out;
  const double end = std::min(t, queue_stop);
  auto res = ode.solve(rhs, 0.0, {p.z}, end, event);
  if (res.event) {
    out.tau_z = res.t;
    out.tau = std::min(res.t, queue_stop);
    out.z = 0.0;
    return out;
  }
  out.z = res.y[0];
  if (t >= queue_stop) {
    out.tau = queue_stop;
    // a bid depletion takes the order with it
    if (queue_stop == h.tau_b) {
      out.tau_z = h.tau_b;
      out.z = 0.0;
    }
  }
  return out;
}

inline double fluid_position_general(const FluidParams& p, const CancellationRule& rule, double t) {
  return fluid_position_general_full(p, rule, t).z;
}

struct LinearIntensityResult {
  double qb = 0.0, qa = 0.0, z = 0.0;
  double tau_a = kInf, tau_b = kInf, tau_z = kInf, tau = kInf;
  double k = 0.0;             ///< decay rate of the total intensity
  bool bid_condition = true;  ///< bid side depletes in finite time
  bool ask_condition = true;  ///< ask side depletes in finite time
  bool corollary_conditions = true;  ///< k > 0 and both band conditions
};

namespace detail {

/// (1 - exp(-x)) / x, continuous at 0.
inline double one_minus_exp_over(double x) {
  if (std::fabs(x) < 1e-8) return 1.0 - 0.5 * x + x * x / 6.0;
  return -std::expm1(-x) / x;
}

struct LinearFluid {
  FluidParams p;
  double alpha, beta;
  FluidConstants c;
  double l0, k;

  double intensity(double t) const { return l0 * std::exp(-k * t); }
  double qb(double t) const { return p.qb - c.vb * l0 * t * one_minus_exp_over(k * t); }
  double qa(double t) const { return p.qa - c.va * l0 * t * one_minus_exp_over(k * t); }

  /// integral of vbar_3 L(u) / Q^b(u) over [0, s]
  double cancel_exponent(double s) const {
    if (c.vb == 0.0) return p.vbar[2] * l0 * s * one_minus_exp_over(k * s) / p.qb;
    return p.vbar[2] / c.vb * std::log(p.qb / qb(s));
  }

  double tau_side(double q, double v) const {
    if (!(v > 0.0)) return kInf;
    const double w = k * q / (v * l0);
    if (k == 0.0) return q / (v * l0);
    if (w >= 1.0) return kInf;
    return -std::log1p(-w) / k;
  }

  double z(double t) const {
    if (t == 0.0) return p.z;
    const double kt = cancel_exponent(t);
    auto f = [&](double s) { return p.vbar[1] * intensity(s) * std::exp(cancel_exponent(s) - kt); };
    const double inflow = p.vbar[1] > 0.0 ? integrate(f, 0.0, t, 1e-10 * p.z, 1e-13).value : 0.0;
    return p.z * std::exp(-kt) - inflow;
  }
};

}  // namespace detail

/// Fluid limit when the arrival intensity is lambda + alpha Q^a + beta Q^b.
inline LinearIntensityResult fluid_linear_intensity(const FluidParams& p, double alpha, double beta, double t) {
  validate(p);
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("fluid_linear_intensity: coefficients must be nonnegative");
  if (!(t >= 0.0)) throw std::invalid_argument("fluid_linear_intensity: t must be nonnegative");
  detail::LinearFluid lf{p, alpha, beta, fluid_constants(p), 0.0, 0.0};
  lf.l0 = p.lambda + beta * p.qb + alpha * p.qa;
  lf.k = beta * lf.c.vb + alpha * lf.c.va;
  LinearIntensityResult r;
  r.k = lf.k;
  const double cross = p.qa * lf.c.vb - p.qb * lf.c.va;
  r.bid_condition = p.lambda * lf.c.vb + alpha * cross > 0.0;
  r.ask_condition = p.lambda * lf.c.va - beta * cross > 0.0;
  r.corollary_conditions = lf.k > 0.0 && r.bid_condition && r.ask_condition;
  r.tau_b = lf.tau_side(p.qb, lf.c.vb);
  r.tau_a = lf.tau_side(p.qa, lf.c.va);
  // Z is decreasing while positive and vanishes no later than Q^b
  auto zf = [&](double s) { return lf.z(s); };
  if (std::isfinite(r.tau_b)) {
    const double hi = r.tau_b * (1.0 - 1e-12);
    r.tau_z = lf.z(hi) > 0.0 ? r.tau_b : find_root(zf, 0.0, hi, 1e-13);
  } else {
    double hi = 1.0;
    while (lf.z(hi) > 0.0 && hi < 1e8) hi *= 2.0;
    if (lf.z(hi) <= 0.0) r.tau_z = find_root(zf, 0.0, hi, 1e-13);
  }
  r.tau = std::min({r.tau_a, r.tau_b, r.tau_z});
  const double s = std::min(t, r.tau);
  r.qb = lf.qb(s);
  r.qa = lf.qa(s);
  r.z = s >= r.tau_z ? 0.0 : lf.z(s);
  return r;
}

/// Z(t) in the linear-intensity model by integrating its ODE (test and fallback use).
inline double linear_intensity_position_ode(const FluidParams& p, double alpha, double beta, double t) {
  const auto c = fluid_constants(p);
  DormandPrince ode;
  auto rhs = [&](double, const std::vector<double>& y, std::vector<double>& dy) {
    const double l = p.lambda + alpha * y[1] + beta * y[0];
    dy[0] = -c.vb * l;
    dy[1] = -c.va * l;
    dy[2] = -p.vbar[1] * l - p.vbar[2] * y[2] / y[0] * l;
  };
  auto event = [](double, const std::vector<double>& y) { return std::min({y[0], y[1], y[2]}); };
  auto res = ode.solve(rhs, 0.0, {p.qb, p.qa, p.z}, t, event);
  return res.y[2];
}

}  // namespace lobqueue
