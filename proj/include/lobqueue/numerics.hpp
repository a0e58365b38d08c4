#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace lobqueue {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
  bool converged = false;
};

namespace detail {

struct GkSegment {
  double a, b, value, error;
  bool operator<(const GkSegment& o) const { return error < o.error; }
};

template <class F>
GkSegment gauss_kronrod15(F& f, double a, double b) {
  static constexpr std::array<double, 8> xk = {
      0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
      0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
      0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
      0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
  static constexpr std::array<double, 8> wk = {
      0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
      0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
      0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
      0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
  static constexpr std::array<double, 4> wg = {
      0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
      0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double kron = wk[7] * fc, gauss = wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double dx = h * xk[j];
    const double f1 = f(c - dx), f2 = f(c + dx);
    kron += wk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += wg[j / 2] * (f1 + f2);
  }
  kron *= h;
  gauss *= h;
  return {a, b, kron, std::fabs(kron - gauss)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on a finite interval.
template <class F>
QuadResult integrate(F&& f, double a, double b, double abs_tol = 1e-12, double rel_tol = 1e-10,
                     int max_segments = 2000) {
  QuadResult out;
  if (a == b) {
    out.converged = true;
    return out;
  }
  double sign = 1.0;
  if (b < a) {
    std::swap(a, b);
    sign = -1.0;
  }
  std::priority_queue<detail::GkSegment> heap;
  auto first = detail::gauss_kronrod15(f, a, b);
  out.evaluations = 15;
  double total = first.value, err = first.error;
  heap.push(first);
  while (err > std::max(abs_tol, rel_tol * std::fabs(total)) && int(heap.size()) < max_segments) {
    auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      heap.push(worst);
      break;
    }
    auto left = detail::gauss_kronrod15(f, worst.a, mid);
    auto right = detail::gauss_kronrod15(f, mid, worst.b);
    out.evaluations += 30;
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }
  // re-add to limit cancellation drift
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  out.value = sign * total;
  out.error = err;
  out.converged = err <= std::max(abs_tol, rel_tol * std::fabs(total));
  return out;
}

/// Integral over [a, inf) through the map x = a + u/(1-u).
template <class F>
QuadResult integrate_to_infinity(F&& f, double a, double abs_tol = 1e-12, double rel_tol = 1e-10,
                                 int max_segments = 2000) {
  auto g = [&](double u) {
    const double one_minus = 1.0 - u;
    const double x = a + u / one_minus;
    const double v = f(x);
    return v == 0.0 ? 0.0 : v / (one_minus * one_minus);
  };
  return integrate(g, 0.0, 1.0, abs_tol, rel_tol, max_segments);
}


/// Gauss-Legendre nodes and weights on [-1, 1]; cached per order.
struct GaussLegendre {
  std::vector<double> x, w;
};

inline const GaussLegendre& gauss_legendre(int m) {
  static std::mutex mu;
  static std::map<int, std::unique_ptr<GaussLegendre>> cache;
  std::lock_guard lock(mu);
  auto& slot = cache[m];
  if (!slot) {
    auto g = std::make_unique<GaussLegendre>();
    g->x.resize(m);
    g->w.resize(m);
    for (int i = 0; i < (m + 1) / 2; ++i) {
      double z = std::cos(M_PI * (i + 0.75) / (m + 0.5));
      double dp = 0.0;
      for (int it = 0; it < 100; ++it) {
        double p0 = 1.0, p1 = 0.0;
        for (int j = 1; j <= m; ++j) {
          const double p2 = p1;
          p1 = p0;
          p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
        }
        dp = m * (z * p0 - p1) / (z * z - 1.0);
        const double dz = p0 / dp;
        z -= dz;
        if (std::fabs(dz) < 1e-16) break;
      }
      g->x[i] = -z;
      g->x[m - 1 - i] = z;
      g->w[i] = g->w[m - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    slot = std::move(g);
  }
  return *slot;
}

/// Bracketed root by bisection interleaved with secant (Illinois) steps.
template <class F>
double find_root(F&& f, double lo, double hi, double xtol = 1e-13, int max_iter = 500) {
  double flo = f(lo), fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0.0) == (fhi > 0.0)) throw std::domain_error("find_root: root not bracketed");
  int side = 0;
  for (int it = 0; it < max_iter; ++it) {
    double x = (lo * fhi - hi * flo) / (fhi - flo);
    if (!(x > lo && x < hi) || it % 4 == 3) x = 0.5 * (lo + hi);
    const double fx = f(x);
    if (fx == 0.0) return x;
    if ((fx > 0.0) == (flo > 0.0)) {
      lo = x;
      flo = fx;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = x;
      fhi = fx;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
    if (hi - lo <= xtol * std::max(1.0, std::fabs(lo))) break;
  }
  return 0.5 * (lo + hi);
}

/// Thrown when an ODE integration cannot continue; carries the last good state.
struct IntegrationFailure : std::runtime_error {
  double t;
  std::vector<double> state;
  IntegrationFailure(const std::string& what, double t_, std::vector<double> y)
      : std::runtime_error(what), t(t_), state(std::move(y)) {}
};

struct OdeResult {
  double t = 0.0;           ///< time reached
  std::vector<double> y;    ///< state at t
  bool event = false;       ///< integration stopped at an event
  int steps = 0;
};

/// Dormand-Prince 5(4) with step-size control. The optional event function is
/// watched for a sign change from positive to nonpositive; the crossing is
/// located by bisection on the step to `event_tol`.
class DormandPrince {
 public:
  using Rhs = std::function<void(double, const std::vector<double>&, std::vector<double>&)>;
  using Event = std::function<double(double, const std::vector<double>&)>;

  double rtol = 1e-11;
  double atol = 1e-12;
  double event_tol = 1e-12;
  int max_steps = 200000;

  OdeResult solve(const Rhs& rhs, double t0, std::vector<double> y0, double t1, const Event& event = {}) const {
    const std::size_t n = y0.size();
    OdeResult res;
    res.t = t0;
    res.y = y0;
    if (t1 <= t0) return res;
    if (event && !(event(t0, y0) > 0.0)) {
      res.event = true;
      return res;
    }
    double h = std::min(1e-3 * (t1 - t0) + 1e-6, t1 - t0);
    std::vector<double> y = y0, ynew(n), err(n);
    double t = t0;
    while (t < t1) {
      if (res.steps++ > max_steps) throw IntegrationFailure("ode: step limit reached", t, y);
      h = std::min(h, t1 - t);
      const double e = step(rhs, t, y, h, ynew, err);
      if (!std::isfinite(e)) {
        if (h < 1e-14 * std::max(1.0, std::fabs(t))) throw IntegrationFailure("ode: non-finite state", t, y);
        h *= 0.25;
        continue;
      }
      if (e <= 1.0) {
        if (event && !(event(t + h, ynew) > 0.0)) {
          // bisect on the step length
          double lo = 0.0, hi = h;
          std::vector<double> ymid(n), etmp(n);
          while (hi - lo > event_tol) {
            const double mid = 0.5 * (lo + hi);
            step(rhs, t, y, mid, ymid, etmp);
            if (event(t + mid, ymid) > 0.0)
              lo = mid;
            else
              hi = mid;
          }
          step(rhs, t, y, hi, ynew, etmp);
          res.t = t + hi;
          res.y = ynew;
          res.event = true;
          return res;
        }
        t += h;
        y = ynew;
        const double fac = e == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(e, -0.2), 0.2, 5.0);
        h *= fac;
      } else {
        h *= std::clamp(0.9 * std::pow(e, -0.25), 0.1, 0.9);
        if (h < 1e-15 * std::max(1.0, std::fabs(t))) throw IntegrationFailure("ode: step size underflow", t, y);
      }
    }
    res.t = t1;
    res.y = y;
    return res;
  }

 private:
  double step(const Rhs& rhs, double t, const std::vector<double>& y, double h, std::vector<double>& out,
              std::vector<double>& err) const {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                            a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                            e6 = 22.0 / 525, e7 = -1.0 / 40;
    const std::size_t n = y.size();
    std::vector<double> k1(n), k2(n), k3(n), k4(n), k5(n), k6(n), k7(n), tmp(n);
    rhs(t, y, k1);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * a21 * k1[i];
    rhs(t + c2 * h, tmp, k2);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    rhs(t + c3 * h, tmp, k3);
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    rhs(t + c4 * h, tmp, k4);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    rhs(t + c5 * h, tmp, k5);
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    rhs(t + h, tmp, k6);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    rhs(t + h, out, k7);
    double e = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      err[i] = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double sc = atol + rtol * std::max(std::fabs(y[i]), std::fabs(out[i]));
      e = std::max(e, std::fabs(err[i]) / sc);
      if (!std::isfinite(out[i])) return std::numeric_limits<double>::infinity();
    }
    return e;
  }
};

}  // namespace lobqueue
