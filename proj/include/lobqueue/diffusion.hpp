#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fluid.hpp"
#include "numerics.hpp"
#include "order_flow.hpp"
#include "special_functions.hpp"

namespace lobqueue {

/// Brownian approximation of (Q^b, Q^a): drift mu, covariance cov, started at (qb, qa).
/// The polar quantities refer to the whitened process sigma^{-1} X, in which the
/// quadrant becomes a wedge of angle alpha; theta = 0 is the ask side emptying and
/// theta = alpha the bid side emptying.
struct DiffusionParams {
  Vec2 mu = Vec2::Zero();
  Mat2 cov = Mat2::Identity();
  double sigma1 = 1.0, sigma2 = 1.0, rho = 0.0;
  double alpha = M_PI / 2, r0 = 0.0, theta0 = 0.0;
  double qb = 0.0, qa = 0.0;
  Mat6 psi = Mat6::Zero();

  double nu(int n) const { return n * M_PI / alpha; }

  /// Upper-triangular factor sigma with sigma sigma^T = cov.
  Mat2 sigma() const {
    Mat2 s;
    s << sigma1 * std::sqrt(1.0 - rho * rho), sigma1 * rho, 0.0, sigma2;
    return s;
  }
  Mat2 sigma_inverse() const {
    const double w = std::sqrt(1.0 - rho * rho);
    Mat2 s;
    s << 1.0 / (sigma1 * w), -rho / (sigma2 * w), 0.0, 1.0 / sigma2;
    return s;
  }
  Vec2 kappa() const { return sigma_inverse() * mu; }
  Vec2 start_whitened() const { return sigma_inverse() * Vec2(qb, qa); }
};

/// Fills the geometry from (mu, sigma1, sigma2, rho, qb, qa).
inline DiffusionParams make_diffusion_params(const Vec2& mu, double sigma1, double sigma2, double rho, double qb,
                                             double qa) {
  if (!(sigma1 > 0.0) || !(sigma2 > 0.0)) throw std::invalid_argument("diffusion: sigma1 and sigma2 must be positive");
  if (!(std::fabs(rho) < 1.0)) throw std::invalid_argument("diffusion: |rho| must be < 1");
  if (!(qb > 0.0) || !(qa > 0.0)) throw std::invalid_argument("diffusion: initial queues must be positive");
  DiffusionParams d;
  d.mu = mu;
  d.sigma1 = sigma1;
  d.sigma2 = sigma2;
  d.rho = rho;
  d.cov << sigma1 * sigma1, rho * sigma1 * sigma2, rho * sigma1 * sigma2, sigma2 * sigma2;
  d.qb = qb;
  d.qa = qa;
  const double w = std::sqrt(1.0 - rho * rho);
  d.alpha = std::atan2(w, -rho);
  const double x = qb / sigma1, y = qa / sigma2;
  d.r0 = std::sqrt((x * x + y * y - 2.0 * rho * x * y) / (1.0 - rho * rho));
  d.theta0 = std::atan2(y * w, x - rho * y);
  return d;
}

/// Drift and covariance of the queue approximation from the flow moments.
inline DiffusionParams derive_diffusion_params(const FlowMoments& m, double qb, double qa) {
  const auto a = queue_map();
  const Vec2 mu = m.lambda * a * m.vbar;
  const Mat2 cov = a * m.psi * a.transpose();
  Eigen::SelfAdjointEigenSolver<Mat2> es(cov);
  const double low = es.eigenvalues()[0];
  if (!(low > 0.0)) {
    std::ostringstream os;
    os << "diffusion: queue covariance is not positive definite (eigenvalue " << low << ")";
    throw std::invalid_argument(os.str());
  }
  const double s1 = std::sqrt(cov(0, 0)), s2 = std::sqrt(cov(1, 1));
  auto d = make_diffusion_params(mu, s1, s2, cov(0, 1) / (s1 * s2), qb, qa);
  d.cov = cov;
  d.psi = m.psi;
  return d;
}

/// Thrown when an angular series has not settled within its term cap.
struct SeriesNotConverged : std::runtime_error {
  double partial_sum;
  double last_term;
  SeriesNotConverged(const std::string& w, double s, double t) : std::runtime_error(w), partial_sum(s), last_term(t) {}
};

struct SurvivalResult {
  double value = 1.0;
  int terms = 0;
  bool sub_probability = false;  ///< drift pushes away from a boundary, so exit may never happen
};

namespace detail {

inline constexpr int kSeriesCap = 200;

/// Sums f(1), f(2), ... and stops once four consecutive terms are below tol |sum|
/// (four, so that isolated zeros of sin(n pi theta0 / alpha) do not end it early).
template <class F>
std::pair<double, int> angular_series(F&& term, double tol, int cap = kSeriesCap) {
  double sum = 0.0;
  int small = 0;
  double last = 0.0;
  for (int n = 1; n <= cap; ++n) {
    last = term(n);
    sum += last;
    if (std::fabs(last) <= tol * std::fabs(sum) || (sum == 0.0 && last == 0.0 && n > 8))
      ++small;
    else
      small = 0;
    if (small >= 4 && n >= 4) return {sum, n};
  }
  throw SeriesNotConverged("angular series did not converge within the term cap", sum, last);
}

}  // namespace detail

namespace detail {

/// Distance from the whitened start to the nearer side of the wedge.
inline double wedge_distance(const DiffusionParams& d) {
  auto side = [&](double angle) { return angle >= M_PI / 2 ? d.r0 : d.r0 * std::sin(angle); };
  return std::min(side(d.theta0), side(d.alpha - d.theta0));
}

/// True when leaving the wedge by time t has probability below e^-45, so that
/// survival is 1 to double precision (reflection bound on each side).
inline bool exit_negligible(const DiffusionParams& d, double t) {
  const double gap = wedge_distance(d) - d.kappa().norm() * t;
  return gap > 0.0 && gap * gap / (2.0 * t) > 45.0;
}

/// Terms needed before I_nu(y) e^{-y} ~ exp(-nu^2 / 2y) is negligible.
inline int series_cap(const DiffusionParams& d, double y) {
  const double nu_max = std::sqrt(2.0 * 60.0 * std::max(y, 1.0)) + 60.0;
  return std::max(kSeriesCap, int(std::ceil(nu_max * d.alpha / M_PI)) + 8);
}

}  // namespace detail

/// Zero-drift survival P(iota > t) through the Bessel series.
inline SurvivalResult survival_zero_drift(const DiffusionParams& d, double t, double tol = 1e-12) {
  if (!(t > 0.0)) throw std::invalid_argument("survival_probability: t must be positive");
  if (detail::exit_negligible(d, t)) return {};
  const double y = d.r0 * d.r0 / (4.0 * t);
  auto term = [&](int n) {
    if (n % 2 == 0) return 0.0;
    const double nu = d.nu(n);
    return std::sin(n * M_PI * d.theta0 / d.alpha) / n *
           (bessel_i_scaled(0.5 * (nu - 1.0), y) + bessel_i_scaled(0.5 * (nu + 1.0), y));
  };
  auto [sum, terms] = detail::angular_series(term, tol, detail::series_cap(d, y));
  SurvivalResult r;
  r.value = std::clamp(2.0 * d.r0 / std::sqrt(2.0 * M_PI * t) * sum, 0.0, 1.0);
  r.terms = terms;
  return r;
}

/// Survival with drift: Girsanov weight on the killed wedge density, integrated
/// over the angle (Gauss-Legendre) and the radius (adaptive), term by term.
inline SurvivalResult survival_with_drift(const DiffusionParams& d, double t, double tol = 1e-10) {
  if (!(t > 0.0)) throw std::invalid_argument("survival_probability: t must be positive");
  if (detail::exit_negligible(d, t)) {
    SurvivalResult r;
    r.sub_probability = d.mu[0] > 0.0 || d.mu[1] > 0.0;
    return r;
  }
  const Vec2 k = d.kappa();
  const Vec2 z0 = d.start_whitened();
  const double kn = k.norm();
  const double log_pre = std::log(2.0 / (d.alpha * t)) - k.dot(z0) - 0.5 * kn * kn * t;
  const double lo = std::max(0.0, d.r0 - 14.0 * std::sqrt(t));
  const double hi = d.r0 + kn * t + 14.0 * std::sqrt(t);
  auto term = [&](int n) {
    const double nu = d.nu(n);
    const double s0 = std::sin(n * M_PI * d.theta0 / d.alpha);
    if (std::fabs(s0) < 1e-15) return 0.0;
    const int m = std::max(48, n + 40 + int(2.0 * hi * kn));
    const auto& gl = gauss_legendre(m);
    auto radial = [&](double r) {
      double ang = 0.0;
      for (int i = 0; i < m; ++i) {
        const double th = 0.5 * d.alpha * (gl.x[i] + 1.0);
        ang += gl.w[i] * std::sin(nu * th) * std::exp(r * (k[0] * std::cos(th) + k[1] * std::sin(th)));
      }
      ang *= 0.5 * d.alpha;
      const double dr = r - d.r0;
      return r * std::exp(log_pre - dr * dr / (2.0 * t)) * bessel_i_scaled(nu, r * d.r0 / t) * ang;
    };
    return s0 * integrate(radial, lo, hi, 1e-16, 1e-11).value;
  };
  auto [sum, terms] = detail::angular_series(term, tol);
  SurvivalResult r;
  r.value = std::clamp(sum, 0.0, 1.0);
  r.terms = terms;
  r.sub_probability = d.mu[0] > 0.0 || d.mu[1] > 0.0;
  return r;
}

inline SurvivalResult survival_probability(const DiffusionParams& d, double t, double tol = 1e-10) {
  if (d.mu[0] == 0.0 && d.mu[1] == 0.0) return survival_zero_drift(d, t, std::min(tol, 1e-12));
  return survival_with_drift(d, t, tol);
}

struct PriceDecreaseResult {
  double value = 0.0;
  double error = 0.0;  ///< quadrature error estimate
  bool sub_probability = false;
};

/// Probability that the bid queue empties first. Zero drift: theta0 / alpha.
/// With drift: the bid-side exit flux density of the driftless wedge process,
/// reweighted by the Girsanov factor and integrated over exit time and radius.
/// The time integral is done in closed form,
///   int_0^inf e^{-p t} t^{-1} e^{-(a^2+b^2)/2t} I_nu(ab/t) dt = 2 I_nu(k a) K_nu(k b),
/// a <= b, k = sqrt(2p), leaving one radial integral per series term.
inline PriceDecreaseResult price_decrease_probability(const DiffusionParams& d, double tol = 1e-10) {
  PriceDecreaseResult out;
  if (d.mu[0] == 0.0 && d.mu[1] == 0.0) {
    out.value = d.theta0 / d.alpha;
    return out;
  }
  out.sub_probability = d.mu[0] > 0.0 || d.mu[1] > 0.0;
  const Vec2 kv = d.kappa();
  const Vec2 z0 = d.start_whitened();
  const double k = kv.norm();
  const double ks = kv.dot(Vec2(std::cos(d.alpha), std::sin(d.alpha)));
  const double r0 = d.r0;
  const double phase = M_PI * (d.alpha - d.theta0) / d.alpha;
  double err = 0.0;

  // T_n = int_0^inf e^{ks r} r^{-1} 2 I_nu(k min(r,r0)) K_nu(k max(r,r0)) dr
  auto t_n = [&](double nu) {
    const double li0 = log_bessel_i_scaled(nu, k * r0) + k * r0;
    const double lk0 = log_bessel_k(nu, k * r0);
    auto inner = [&](double r) {
      if (r <= 0.0) return 0.0;
      const double l = log_bessel_i_scaled(nu, k * r) + k * r - li0 + ks * r;
      return std::exp(l) / r;
    };
    auto outer = [&](double r) {
      const double l = log_bessel_k(nu, k * r) - lk0 + ks * r;
      return l < -745.0 ? 0.0 : std::exp(l) / r;
    };
    auto a = integrate(inner, 0.0, r0, 1e-300, 1e-13, 4000);
    auto b = integrate_to_infinity(outer, r0, 1e-300, 1e-13, 4000);
    err += a.error + b.error;
    return 2.0 * std::exp(li0 + lk0) * (a.value + b.value);
  };
  // For large order, T_n = 2E / nu^2 + c4 / nu^4 + O(nu^-5) with E = e^{ks r0}; those two
  // parts are summed in closed form through sum sin(n x) / n and sum sin(n x) / n^3.
  const double e0 = std::exp(ks * r0);
  const double c4 = 2.0 * e0 * (ks * r0 + ks * ks * r0 * r0 - k * k * r0 * r0);
  double sum = 0.0, last = 0.0;
  int small = 0;
  for (int n = 1; n <= detail::kSeriesCap; ++n) {
    const double nu = d.nu(n);
    const double s = std::sin(n * phase);
    if (s == 0.0) {
      ++small;
      continue;
    }
    const double nu2 = nu * nu;
    last = n * s * (t_n(nu) - 2.0 * e0 / nu2 - c4 / (nu2 * nu2));
    sum += last;
    if (std::fabs(last) <= tol * e0) {
      if (++small >= 4) break;
    } else {
      small = 0;
    }
  }
  const double x = phase;
  const double a2 = d.alpha * d.alpha / (M_PI * M_PI);
  const double closed = 2.0 * e0 * a2 * 0.5 * (M_PI - x) +
                        c4 * a2 * a2 * (M_PI * M_PI * x / 6.0 - M_PI * x * x / 4.0 + x * x * x / 12.0);
  const double weight = std::exp(-kv.dot(z0)) * M_PI / (d.alpha * d.alpha);
  if (small < 4)
    throw SeriesNotConverged("price_decrease_probability: series did not converge", weight * (sum + closed),
                             weight * last);
  out.value = std::clamp(weight * (sum + closed), 0.0, 1.0);
  out.error = weight * (err + std::fabs(last));
  return out;
}

/// Gaussian tail of the execution-time fluctuation: limit of P(sqrt(n)(tau_n^z - tau^z) >= x).
inline double execution_time_fluct_cdf(double a, double sigma_y, double x) {
  if (!(a > 0.0)) throw std::invalid_argument("execution_time_fluct_cdf: a must be positive");
  if (sigma_y == 0.0) return x < 0.0 ? 1.0 : (x == 0.0 ? 0.5 : 0.0);
  return 1.0 - normal_cdf(a * x / sigma_y);
}

enum class Side { bid, ask };

/// Which slope is used for the linearisation of the queue at its depletion time.
enum class DepletionScale {
  displayed,  ///< sqrt(q lambda v / phi)
  corrected,  ///< (lambda v)^{3/2} / sqrt(q phi): slope of Q at the depletion time is -lambda v
};

/// Variance rate of the side's queue fluctuation (psi combination).
inline double queue_fluct_rate(Side side, const Mat6& psi) {
  const int o = side == Side::bid ? 0 : 3;
  return psi(o, o) + psi(o + 1, o + 1) + psi(o + 2, o + 2) - 2.0 * psi(o, o + 1) - 2.0 * psi(o, o + 2) +
         2.0 * psi(o + 1, o + 2);
}

/// Limiting tail P(sqrt(n)(tau_n - tau) >= x) for the bid or ask depletion time.
inline double depletion_time_fluct_cdf(Side side, const FluidParams& f, const Mat6& psi, double x,
                                       DepletionScale scale = DepletionScale::corrected) {
  const auto k = fluid_constants(f);
  const double v = side == Side::bid ? k.vb : k.va;
  const double q = side == Side::bid ? f.qb : f.qa;
  if (!(v > 0.0)) throw std::invalid_argument("depletion_time_fluct_cdf: this side does not deplete");
  const double phi = queue_fluct_rate(side, psi);
  const double lv = f.lambda * v;
  const double c = scale == DepletionScale::displayed ? std::sqrt(q * lv / phi) : lv * std::sqrt(lv / (q * phi));
  return 1.0 - normal_cdf(c * x);
}

/// Standard deviation of the limiting sqrt(n)(tau_n - tau) for a depletion time.
inline double depletion_time_sd(Side side, const FluidParams& f, const Mat6& psi,
                                DepletionScale scale = DepletionScale::corrected) {
  const auto k = fluid_constants(f);
  const double v = side == Side::bid ? k.vb : k.va;
  const double q = side == Side::bid ? f.qb : f.qa;
  const double phi = queue_fluct_rate(side, psi);
  const double lv = f.lambda * v;
  return scale == DepletionScale::displayed ? std::sqrt(phi / (q * lv)) : std::sqrt(q * phi / lv) / lv;
}

enum class VarianceMode { closed_form, quadrature };

/// Constants of the closed-form fluctuation variance.
struct FluctuationConstants {
  double phi, alpha, beta, gamma, delta;
  double alpha_hat, beta_hat, gamma_hat, delta_hat, eta_hat;
};

inline FluctuationConstants fluctuation_constants(const FluidParams& f, const Mat6& psi) {
  const auto k = fluid_constants(f);
  const double a = k.a, b = k.b, c = k.c, l = f.lambda, v3 = f.vbar[2];
  const double kk = f.z + a * b / (1.0 + c);
  const double b1c = std::pow(b, 1.0 / c);
  FluctuationConstants r{};
  r.phi = psi(0, 0) + psi(1, 1) + psi(2, 2) - psi(0, 1) - psi(0, 2) - psi(1, 0) - psi(2, 0) + psi(1, 2) + psi(2, 1);
  r.alpha = -(psi(0, 1) - psi(1, 1) - psi(2, 1)) + (psi(0, 2) - psi(1, 2) - psi(2, 2)) * a / ((1.0 + c) * l * v3) -
            a * r.phi / (c * (1.0 + c) * l * v3);
  r.beta = -(psi(0, 2) - psi(1, 2) - psi(2, 2)) * kk * b1c / (l * v3) + kk * r.phi * b1c / (c * l * v3);
  r.gamma = a * b * r.phi / (c * (1.0 + c) * l * v3);
  r.delta = -r.phi * kk * std::pow(b, 1.0 / c + 1.0) / (c * l * v3);
  r.alpha_hat = r.alpha / (c + 1.0);
  r.beta_hat = -std::pow(b, 1.0 / c + 1.0) / (1.0 + c) - r.gamma * b1c + r.delta / (b * c) - r.beta * std::log(b) / c;
  r.gamma_hat = r.beta / c;
  r.delta_hat = r.gamma;
  r.eta_hat = -r.delta / c;
  return r;
}

namespace detail {

/// exp(-int_s^t lambda vbar_3 / Q^b(u) du) for the linear bid queue.
struct DecayFactor {
  double lambda, v3, vb, qb;
  double operator()(double t, double s) const {
    if (v3 == 0.0) return 1.0;
    if (vb == 0.0) return std::exp(-lambda * v3 * (t - s) / qb);
    const double qt = qb - lambda * vb * t, qs = qb - lambda * vb * s;
    return std::pow(qt / qs, v3 / vb);
  }
};

}  // namespace detail

/// Variance of the limiting fluctuation Y(t) of the order position.
/// quadrature: nested adaptive quadrature of the Ito second-moment equation.
/// closed_form: the explicit expression valid for c < 0, c != -1, with the
/// arrival-variance weight W taken from the psi convention.
inline double fluctuation_variance(const FluidParams& f, const FlowMoments& m, double t,
                                   VarianceMode mode = VarianceMode::quadrature) {
  validate(f);
  if (!(t >= 0.0)) throw std::invalid_argument("fluctuation_variance: t must be nonnegative");
  const auto h = fluid_hitting_times(f);
  if (t > h.tau_z) throw std::invalid_argument("fluctuation_variance: t must not exceed tau_z");
  if (t == 0.0) return 0.0;
  const auto k = fluid_constants(f);
  const Mat6& psi = m.psi;
  const double l = f.lambda, v3 = f.vbar[2];
  auto qb = [&](double s) { return f.qb - l * k.vb * s; };
  auto zf = [&](double s) { return fluid_position(f, s); };
  const detail::DecayFactor g{l, v3, k.vb, f.qb};

  if (mode == VarianceMode::quadrature) {
    const double phi = queue_fluct_rate(Side::bid, psi);
    const double c2 = psi(0, 1) - psi(1, 1) - psi(2, 1);
    const double c3 = psi(0, 2) - psi(1, 2) - psi(2, 2);
    const double tol = 1e-12;
    // E[Y(s) (Psi^1 - Psi^2 - Psi^3)(s)]
    auto cross = [&](double s) {
      if (s == 0.0) return 0.0;
      auto f1 = [&](double u) { return g(s, u); };
      auto f2 = [&](double u) { return g(s, u) * zf(u) / qb(u); };
      auto f3 = [&](double u) { return g(s, u) * zf(u) * u * l * v3 / (qb(u) * qb(u)); };
      return -c2 * integrate(f1, 0.0, s, tol, 1e-12).value - c3 * integrate(f2, 0.0, s, tol, 1e-12).value +
             phi * integrate(f3, 0.0, s, tol, 1e-12).value;
    };
    auto outer = [&](double s) {
      const double gg = g(t, s) * g(t, s);
      const double r = zf(s) / qb(s);
      const double quad = psi(1, 1) + 2.0 * r * psi(1, 2) + r * r * psi(2, 2);
      const double feed = v3 > 0.0 ? 2.0 * zf(s) / (qb(s) * qb(s)) * l * v3 * cross(s) : 0.0;
      return gg * (quad + feed);
    };
    return integrate(outer, 0.0, t, 1e-10, 1e-10).value;
  }

  const double a = k.a, b = k.b, c = k.c;
  if (!(c < 0.0) || detail::z_branch(c) != detail::ZBranch::general || !k.cancellations)
    throw std::invalid_argument("fluctuation_variance: closed form needs c < 0 and c != -1; use quadrature mode");
  double w = m.vd2;
  if (m.convention == PsiConvention::lambda_linear) w *= l;
  if (m.convention == PsiConvention::lambda_cubed) w *= l * l * l;
  const Mat6& sg = m.sigma;
  const double v2 = f.vbar[1];
  const double kk = f.z + a * b / (1.0 + c);
  const double u = b + c * t;
  const double p2 = 2.0 / c, p1 = 1.0 / c;
  const double b1c = std::pow(b, p1);
  const double lv3 = l * v3;
  double s1 = 0.0, s2 = 0.0, s3 = 0.0;
  for (int j = 0; j < 6; ++j) {
    const double e = sg(1, j) - sg(2, j) * a / ((1.0 + c) * lv3);
    s1 += l * e * e + w / 6.0 * std::pow(c / (1.0 + c) * v2, 2);
    s2 += 2.0 * (l * e * sg(2, j) + w / 6.0 * c / (1.0 + c) * v2 * v3);
    s3 += l * sg(2, j) * sg(2, j) + w / 6.0 * v3 * v3;
  }
  double total = (std::pow(u, p2 + 1.0) - std::pow(b, p2 + 1.0)) / ((2.0 + c) * std::pow(u, p2)) * s1;
  total += b1c / lv3 * (std::pow(u, p1) - b1c) / std::pow(u, p2) * kk * s2;
  total += t / std::pow(u, p2 + 1.0) * std::pow(b, p2 - 1.0) / (l * l * v3 * v3) * s3 * kk * kk;
  const auto fc = fluctuation_constants(f, psi);
  total -= 2.0 * a / (std::pow(u, p2) * (1.0 + c) * lv3) *
           (fc.alpha_hat * (std::pow(u, p2 + 1.0) - std::pow(b, p2 + 1.0)) / (2.0 + c) +
            (fc.beta_hat - fc.gamma_hat * c) * (std::pow(u, p1) - b1c) +
            fc.gamma_hat * (std::pow(u, p1) * std::log(u) - b1c * std::log(b)) +
            fc.delta_hat / 2.0 * (std::pow(u, p2) - std::pow(b, p2)) +
            fc.eta_hat / (1.0 - c) * (std::pow(u, p1 - 1.0) - std::pow(b, p1 - 1.0)));
  total += 2.0 / std::pow(u, p2) * kk * b1c / lv3 *
           (fc.alpha_hat * (std::pow(u, p1) - b1c) + (fc.beta_hat + fc.gamma_hat) * t / (b * u) +
            fc.gamma_hat / c * (std::log(b) / b - std::log(u) / u) +
            fc.delta_hat / (1.0 - c) * (std::pow(u, p1 - 1.0) - std::pow(b, p1 - 1.0)) +
            fc.eta_hat / (2.0 * c) * (1.0 / (b * b) - 1.0 / (u * u)));
  return total;
}

}  // namespace lobqueue
