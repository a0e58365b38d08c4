#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "order_flow.hpp"
#include "statistics.hpp"

namespace lobqueue {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// A log moment generating functional Gamma on R^d, convex, Gamma(0) = 0.
/// Outside its domain value() is +inf. The domain is a box of upper bounds
/// (closed or open); coordinates without a bound have upper = +inf.
class LogMgf {
 public:
  virtual ~LogMgf() = default;
  virtual int dim() const = 0;
  virtual double value(const VecX& theta) const = 0;
  virtual VecX gradient(const VecX& theta) const = 0;
  virtual MatX hessian(const VecX& theta) const = 0;
  virtual bool in_domain(const VecX& theta) const { return std::isfinite(value(theta)); }
  /// Coordinates whose upper bound is attained (finite at the bound); +inf if none.
  virtual VecX closed_upper() const { return VecX::Constant(dim(), std::numeric_limits<double>::infinity()); }
};

/// Gamma_N(theta) = lambda (e^theta - 1).
class PoissonLogMgf final : public LogMgf {
 public:
  explicit PoissonLogMgf(double lambda) : lambda_(lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("PoissonLogMgf: lambda must be positive");
  }
  int dim() const override { return 1; }
  double value(const VecX& t) const override { return lambda_ * std::expm1(t[0]); }
  VecX gradient(const VecX& t) const override { return VecX::Constant(1, lambda_ * std::exp(t[0])); }
  MatX hessian(const VecX& t) const override { return MatX::Constant(1, 1, lambda_ * std::exp(t[0])); }

 private:
  double lambda_;
};

namespace detail {

inline double mark_mixture(const MarkModel& m, const VecX& t, VecX* grad, VecX* hess_diag) {
  double s = 0.0;
  for (int j = 0; j < 6; ++j) {
    if (m.p[j] == 0.0) {
      if (grad) (*grad)[j] = 0.0;
      if (hess_diag) (*hess_diag)[j] = 0.0;
      continue;
    }
    const auto mg = size_mgf(m.laws[j], t[j]);
    s += m.p[j] * mg[0];
    if (grad) (*grad)[j] = m.p[j] * mg[1];
    if (hess_diag) (*hess_diag)[j] = m.p[j] * mg[2];
  }
  return s;
}

inline VecX mark_closed_upper(const MarkModel& m) {
  VecX u = VecX::Constant(6, std::numeric_limits<double>::infinity());
  for (int j = 0; j < 6; ++j) {
    const auto d = mgf_domain(m.laws[j]);
    if (m.p[j] > 0.0 && d.inclusive) u[j] = d.upper;
  }
  return u;
}

}  // namespace detail

/// Compound Poisson flow: Gamma(theta) = lambda (E[e^{theta . V}] - 1), with the
/// mark expectation sum_j p_j M_j(theta_j).
class CompoundPoissonLogMgf final : public LogMgf {
 public:
  CompoundPoissonLogMgf(MarkModel marks, double lambda) : marks_(std::move(marks)), lambda_(lambda) {
    validate(marks_);
    if (!(lambda > 0.0)) throw std::invalid_argument("CompoundPoissonLogMgf: lambda must be positive");
  }
  int dim() const override { return 6; }
  double value(const VecX& t) const override { return lambda_ * (detail::mark_mixture(marks_, t, nullptr, nullptr) - 1.0); }
  VecX gradient(const VecX& t) const override {
    VecX g(6);
    detail::mark_mixture(marks_, t, &g, nullptr);
    return lambda_ * g;
  }
  MatX hessian(const VecX& t) const override {
    VecX h(6);
    detail::mark_mixture(marks_, t, nullptr, &h);
    return (lambda_ * h).asDiagonal();
  }
  VecX closed_upper() const override { return detail::mark_closed_upper(marks_); }
  const MarkModel& marks() const { return marks_; }
  double lambda() const { return lambda_; }

 private:
  MarkModel marks_;
  double lambda_;
};

/// Gamma_V(theta) = log E[e^{theta . V_1}] for i.i.d. marks.
class IidMarkLogMgf final : public LogMgf {
 public:
  explicit IidMarkLogMgf(MarkModel marks) : marks_(std::move(marks)) { validate(marks_); }
  int dim() const override { return 6; }
  double value(const VecX& t) const override { return std::log(detail::mark_mixture(marks_, t, nullptr, nullptr)); }
  VecX gradient(const VecX& t) const override {
    VecX g(6);
    const double m = detail::mark_mixture(marks_, t, &g, nullptr);
    return g / m;
  }
  MatX hessian(const VecX& t) const override {
    VecX g(6), h(6);
    const double m = detail::mark_mixture(marks_, t, &g, &h);
    MatX out = MatX(h.asDiagonal()) / m;
    out -= (g / m) * (g / m).transpose();
    return out;
  }
  VecX closed_upper() const override { return detail::mark_closed_upper(marks_); }

 private:
  MarkModel marks_;
};

/// Gamma(theta) ~ (1/L) log mean_b exp(theta . S_b) from sums S_b over disjoint
/// blocks of length L. Finite everywhere; only meaningful where the blocks
/// resolve the tilt.
class EmpiricalBlockLogMgf final : public LogMgf {
 public:
  EmpiricalBlockLogMgf(std::vector<VecX> block_sums, double block_length)
      : sums_(std::move(block_sums)), length_(block_length) {
    if (sums_.empty()) throw std::invalid_argument("EmpiricalBlockLogMgf: no blocks");
    if (!(block_length > 0.0)) throw std::invalid_argument("EmpiricalBlockLogMgf: block length must be positive");
    dim_ = int(sums_[0].size());
    for (const auto& s : sums_)
      if (int(s.size()) != dim_) throw std::invalid_argument("EmpiricalBlockLogMgf: inconsistent dimensions");
  }
  int dim() const override { return dim_; }
  double value(const VecX& t) const override {
    auto w = weights(t);
    return (w.log_norm - std::log(double(sums_.size()))) / length_;
  }
  VecX gradient(const VecX& t) const override {
    auto w = weights(t);
    VecX g = VecX::Zero(dim_);
    for (std::size_t i = 0; i < sums_.size(); ++i) g += w.w[i] * sums_[i];
    return g / length_;
  }
  MatX hessian(const VecX& t) const override {
    auto w = weights(t);
    VecX g = VecX::Zero(dim_);
    MatX h = MatX::Zero(dim_, dim_);
    for (std::size_t i = 0; i < sums_.size(); ++i) {
      g += w.w[i] * sums_[i];
      h += w.w[i] * sums_[i] * sums_[i].transpose();
    }
    return (h - g * g.transpose()) / length_;
  }

 private:
  struct Weights {
    std::vector<double> w;
    double log_norm;
  };
  Weights weights(const VecX& t) const {
    Weights out;
    out.w.resize(sums_.size());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < sums_.size(); ++i) {
      out.w[i] = t.dot(sums_[i]);
      top = std::max(top, out.w[i]);
    }
    double z = 0.0;
    for (auto& v : out.w) {
      v = std::exp(v - top);
      z += v;
    }
    for (auto& v : out.w) v /= z;
    out.log_norm = top + std::log(z);
    return out;
  }
  std::vector<VecX> sums_;
  double length_;
  int dim_;
};

/// Gamma(A^T eta) for a fixed matrix A (rows = new coordinates).
class ComposedLogMgf final : public LogMgf {
 public:
  ComposedLogMgf(const LogMgf& base, MatX a) : base_(base), a_(std::move(a)) {
    if (a_.cols() != base.dim()) throw std::invalid_argument("ComposedLogMgf: dimension mismatch");
  }
  int dim() const override { return int(a_.rows()); }
  double value(const VecX& eta) const override { return base_.value(a_.transpose() * eta); }
  VecX gradient(const VecX& eta) const override { return a_ * base_.gradient(a_.transpose() * eta); }
  MatX hessian(const VecX& eta) const override { return a_ * base_.hessian(a_.transpose() * eta) * a_.transpose(); }

 private:
  const LogMgf& base_;
  MatX a_;
};

enum class LegendreStatus {
  attained,    ///< interior maximiser found
  boundary,    ///< maximiser on a closed domain face; gradient points outward there
  limit,       ///< supremum approached as some coordinates run to -inf
  infinite,    ///< objective verified unbounded along a ray
};

inline std::string to_string(LegendreStatus s) {
  switch (s) {
    case LegendreStatus::attained: return "attained";
    case LegendreStatus::boundary: return "boundary";
    case LegendreStatus::limit: return "limit";
    default: return "infinite";
  }
}

struct LegendreResult {
  double value = 0.0;
  VecX theta;
  VecX ray;  ///< direction of unboundedness when infinite
  double gradient_norm = 0.0;
  int iterations = 0;
  LegendreStatus status = LegendreStatus::attained;
};

struct LegendreFailure : std::runtime_error {
  double gradient_norm;
  LegendreFailure(const std::string& w, double g) : std::runtime_error(w), gradient_norm(g) {}
};

struct LegendreOptions {
  int max_iter = 200;
  double gradient_tol = 1e-11;
  double armijo = 1e-4;
  double ray_norm = 1e4;  ///< |theta| beyond which the ray test is run
};

namespace detail {

/// Returns true when F(theta + s d) grows without bound in s.
inline bool unbounded_along(const LogMgf& g, const VecX& x, const VecX& theta, const VecX& d) {
  double prev = theta.dot(x) - g.value(theta);
  for (int k = 1; k <= 8; ++k) {
    const VecX t = theta + std::pow(10.0, k) * d;
    const double v = t.dot(x) - g.value(t);
    if (!(v > prev)) return false;
    prev = v;
  }
  return prev > 1e6;
}

}  // namespace detail

/// sup_theta { theta . x - Gamma(theta) } by damped Newton with Armijo backtracking.
/// Coordinates pinned at a closed upper bound with outward gradient are held
/// there (projected active set).
inline LegendreResult legendre_point(const LogMgf& g, const VecX& x, const LegendreOptions& opt = {}) {
  const int d = g.dim();
  if (x.size() != d) throw std::invalid_argument("legendre_point: dimension mismatch");
  const VecX upper = g.closed_upper();
  LegendreResult res;
  VecX theta = VecX::Zero(d);
  auto objective = [&](const VecX& t) {
    const double v = g.value(t);
    return std::isfinite(v) ? t.dot(x) - v : -std::numeric_limits<double>::infinity();
  };
  double f = objective(theta);
  std::vector<bool> pinned(d, false);
  for (int it = 0; it < opt.max_iter; ++it) {
    res.iterations = it + 1;
    VecX grad = x - g.gradient(theta);
    // active set: closed bound reached and the ascent direction points out of the domain
    for (int j = 0; j < d; ++j) pinned[j] = std::isfinite(upper[j]) && theta[j] >= upper[j] && grad[j] > 0.0;
    VecX free_grad = grad;
    for (int j = 0; j < d; ++j)
      if (pinned[j]) free_grad[j] = 0.0;
    res.gradient_norm = free_grad.norm();
    if (res.gradient_norm <= opt.gradient_tol * (1.0 + x.norm())) {
      res.value = f;
      res.theta = theta;
      res.status = std::any_of(pinned.begin(), pinned.end(), [](bool b) { return b; }) ? LegendreStatus::boundary
                                                                                      : LegendreStatus::attained;
      return res;
    }
    MatX h = g.hessian(theta);
    for (int j = 0; j < d; ++j)
      if (pinned[j]) {
        h.row(j).setZero();
        h.col(j).setZero();
        h(j, j) = 1.0;
      }
    // Newton step on the concave objective; fall back to gradient ascent when the
    // Hessian is singular in some direction
    Eigen::LDLT<MatX> ldlt(h);
    VecX step = ldlt.solve(free_grad);
    if (!step.allFinite() || ldlt.info() != Eigen::Success || step.dot(free_grad) <= 0.0 ||
        (h * step - free_grad).norm() > 1e-6 * (1.0 + free_grad.norm()))
      step = free_grad / std::max(1.0, h.diagonal().cwiseAbs().maxCoeff());
    // keep closed bounds
    double s = 1.0;
    for (int j = 0; j < d; ++j)
      if (std::isfinite(upper[j]) && step[j] > 0.0 && theta[j] + step[j] > upper[j])
        s = std::min(s, (upper[j] - theta[j]) / step[j]);
    const double slope = free_grad.dot(step);
    VecX next = theta + s * step;
    double fn = objective(next);
    // Near the optimum the predicted gain drops below rounding noise in f;
    // there a full step is kept when it reduces the gradient.
    if (s * slope < 1e-13 * (1.0 + std::fabs(f)) && std::isfinite(fn)) {
      VecX gn = x - g.gradient(next);
      for (int j = 0; j < d; ++j)
        if (pinned[j]) gn[j] = 0.0;
      if (gn.norm() < res.gradient_norm) {
        theta = next;
        f = std::max(f, fn);
        continue;
      }
    }
    int halvings = 0;
    while (!(fn >= f + opt.armijo * s * slope) && halvings < 60) {
      s *= 0.5;
      next = theta + s * step;
      fn = objective(next);
      ++halvings;
    }
    if (halvings == 60) {
      if (std::fabs(fn - f) <= 1e-15 * (1.0 + std::fabs(f))) {
        // no further progress representable
        res.value = f;
        res.theta = theta;
        res.status = LegendreStatus::attained;
        return res;
      }
      throw LegendreFailure("legendre_point: line search failed", res.gradient_norm);
    }
    // snap to closed bounds that were reached
    for (int j = 0; j < d; ++j)
      if (std::isfinite(upper[j]) && next[j] > upper[j] - 1e-15) next[j] = std::min(next[j], upper[j]);
    theta = next;
    f = fn;
    if (theta.norm() > opt.ray_norm) {
      const VecX dir = theta.normalized();
      if (detail::unbounded_along(g, x, theta, dir)) {
        res.value = std::numeric_limits<double>::infinity();
        res.theta = theta;
        res.ray = dir;
        res.status = LegendreStatus::infinite;
        return res;
      }
      if (theta.maxCoeff() < opt.ray_norm) {
        // some coordinates run to -inf with a bounded objective
        res.value = f;
        res.theta = theta;
        res.status = LegendreStatus::limit;
        return res;
      }
    }
  }
  std::ostringstream os;
  os << "legendre_point: no convergence after " << opt.max_iter << " iterations, gradient norm "
     << res.gradient_norm;
  throw LegendreFailure(os.str(), res.gradient_norm);
}

/// Poisson i.i.d. rate density Lambda(x) = sup_theta { theta . x - lambda (E e^{theta . V} - 1) }.
/// The compound functional splits over coordinates, so the supports are checked
/// here: a negative coordinate, or a positive one with p_j = 0, costs +inf; a
/// zero coordinate with p_j > 0 costs lambda p_j (sup approached as theta_j -> -inf).
inline LegendreResult poisson_iid_rate_density(const MarkModel& marks, double lambda, const Vec6& x,
                                               const LegendreOptions& opt = {}) {
  validate(marks);
  LegendreResult res;
  res.theta = VecX::Zero(6);
  std::vector<int> active;
  double fixed = 0.0;
  for (int j = 0; j < 6; ++j) {
    if (x[j] < 0.0 || (marks.p[j] == 0.0 && x[j] > 0.0)) {
      res.value = std::numeric_limits<double>::infinity();
      res.status = LegendreStatus::infinite;
      res.ray = VecX::Zero(6);
      res.ray[j] = x[j] < 0.0 ? -1.0 : 1.0;
      return res;
    }
    if (marks.p[j] == 0.0) continue;
    if (x[j] == 0.0) {
      fixed += lambda * marks.p[j];
      res.theta[j] = -std::numeric_limits<double>::infinity();
      res.status = LegendreStatus::limit;
      continue;
    }
    active.push_back(j);
  }
  if (active.empty()) {
    res.value = fixed;
    return res;
  }
  // restricted functional on the active coordinates: sum_j lambda p_j (M_j - 1)
  struct Restricted final : LogMgf {
    const MarkModel& m;
    double lambda;
    std::vector<int> idx;
    Restricted(const MarkModel& mm, double l, std::vector<int> i) : m(mm), lambda(l), idx(std::move(i)) {}
    int dim() const override { return int(idx.size()); }
    double value(const VecX& t) const override {
      double s = 0.0;
      for (int k = 0; k < dim(); ++k) s += lambda * m.p[idx[k]] * (size_mgf(m.laws[idx[k]], t[k])[0] - 1.0);
      return s;
    }
    VecX gradient(const VecX& t) const override {
      VecX g(dim());
      for (int k = 0; k < dim(); ++k) g[k] = lambda * m.p[idx[k]] * size_mgf(m.laws[idx[k]], t[k])[1];
      return g;
    }
    MatX hessian(const VecX& t) const override {
      VecX h(dim());
      for (int k = 0; k < dim(); ++k) h[k] = lambda * m.p[idx[k]] * size_mgf(m.laws[idx[k]], t[k])[2];
      return h.asDiagonal();
    }
    VecX closed_upper() const override {
      VecX u(dim());
      for (int k = 0; k < dim(); ++k) {
        const auto d = mgf_domain(m.laws[idx[k]]);
        u[k] = d.inclusive ? d.upper : std::numeric_limits<double>::infinity();
      }
      return u;
    }
  } restricted(marks, lambda, active);
  VecX xa(active.size());
  for (std::size_t k = 0; k < active.size(); ++k) xa[k] = x[active[k]];
  auto sub = legendre_point(restricted, xa, opt);
  res.value = sub.value + fixed;
  res.gradient_norm = sub.gradient_norm;
  res.iterations = sub.iterations;
  for (std::size_t k = 0; k < active.size(); ++k) res.theta[active[k]] = sub.theta[k];
  if (sub.status != LegendreStatus::attained || res.status != LegendreStatus::limit) res.status = sub.status;
  return res;
}

/// Piecewise-linear (f^b, f^a) on breakpoints 0 = t_0 < ... < t_m.
struct PiecewiseLinearPath {
  std::vector<double> times;
  std::vector<double> fb, fa;

  std::size_t segments() const { return times.empty() ? 0 : times.size() - 1; }
  Vec2 slope(std::size_t k) const {
    const double dt = times[k + 1] - times[k];
    return Vec2((fb[k + 1] - fb[k]) / dt, (fa[k + 1] - fa[k]) / dt);
  }
};

inline void validate(const PiecewiseLinearPath& p, double qb, double qa) {
  if (p.times.size() < 2 || p.fb.size() != p.times.size() || p.fa.size() != p.times.size())
    throw std::invalid_argument("path: need at least two breakpoints and matching values");
  if (p.times[0] != 0.0) throw std::invalid_argument("path: first breakpoint must be 0");
  for (std::size_t k = 1; k < p.times.size(); ++k)
    if (!(p.times[k] > p.times[k - 1])) throw std::invalid_argument("path: breakpoints must increase");
  if (std::fabs(p.fb[0] - qb) > 1e-12 || std::fabs(p.fa[0] - qa) > 1e-12)
    throw std::invalid_argument("path: must start at (qb, qa)");
  for (std::size_t k = 0; k < p.times.size(); ++k)
    if (!std::isfinite(p.fb[k]) || !std::isfinite(p.fa[k])) throw std::invalid_argument("path: values must be finite");
}

/// Straight path with the given slopes from (qb, qa) on [0, horizon].
inline PiecewiseLinearPath straight_path(double qb, double qa, const Vec2& slope, double horizon) {
  return {{0.0, horizon}, {qb, qb + slope[0] * horizon}, {qa, qa + slope[1] * horizon}};
}

struct SegmentCost {
  double rate = 0.0;        ///< cost per unit time
  double dual = 0.0;        ///< dual value sup_eta eta . y - Gamma(A^T eta)
  double primal = 0.0;      ///< Lambda(x*) by an independent Legendre solve
  double gap = 0.0;         ///< primal - dual
  double feasibility = 0.0; ///< |A x* - y|
  Vec2 eta = Vec2::Zero();
  Vec6 flow = Vec6::Zero(); ///< optimal flow rates x*
  LegendreStatus status = LegendreStatus::attained;
};

/// min_{x >= 0} Lambda(x) subject to A x = y, through its two-dimensional dual.
inline SegmentCost segment_rate(const MarkModel& marks, double lambda, const Vec2& y, bool certify = true,
                                const LegendreOptions& opt = {}) {
  CompoundPoissonLogMgf base(marks, lambda);
  ComposedLogMgf composed(base, MatX(queue_map()));
  SegmentCost out;
  auto dual = legendre_point(composed, VecX(y), opt);
  out.status = dual.status;
  out.dual = dual.value;
  if (dual.status == LegendreStatus::infinite) {
    out.rate = out.primal = std::numeric_limits<double>::infinity();
    out.eta = dual.ray;  // certificate: eta . y - Gamma(A^T eta) grows along this ray
    return out;
  }
  out.eta = dual.theta;
  const VecX x = base.gradient(MatX(queue_map()).transpose() * dual.theta);
  out.flow = x;
  out.rate = out.dual;
  if (!certify) return out;
  out.feasibility = (MatX(queue_map()) * x - VecX(y)).norm();
  out.primal = poisson_iid_rate_density(marks, lambda, out.flow, opt).value;
  out.gap = out.primal - out.dual;
  return out;
}

struct PathRate {
  double value = 0.0;
  std::vector<SegmentCost> segments;
  double max_gap = 0.0;
};

/// Rate I(f^b, f^a) of a piecewise-linear queue path in the Poisson i.i.d. regime:
/// the sum of segment costs weighted by segment lengths.
inline PathRate queue_path_rate(const PiecewiseLinearPath& path, const MarkModel& marks, double lambda,
                                unsigned workers = 1) {
  validate(path, path.fb.empty() ? 0.0 : path.fb[0], path.fa.empty() ? 0.0 : path.fa[0]);
  PathRate out;
  out.segments.resize(path.segments());
  parallel_for(path.segments(), workers,
               [&](std::size_t k) { out.segments[k] = segment_rate(marks, lambda, path.slope(k)); });
  for (std::size_t k = 0; k < path.segments(); ++k) {
    out.value += (path.times[k + 1] - path.times[k]) * out.segments[k].rate;
    if (std::isfinite(out.segments[k].gap)) out.max_gap = std::max(out.max_gap, std::fabs(out.segments[k].gap));
  }
  return out;
}

struct TailExponent {
  double t = 0.0;
  double exponent = 0.0;  ///< -inf over the family of the path rate
  Vec2 endpoint = Vec2::Zero();
  int evaluations = 0;
};

/// Exponent of P(tau_n >= t) restricted to straight paths from (qb, qa) that stay
/// in the closed quadrant up to t: minus the least rate over endpoints (eb, ea) >= 0.
/// The rate of a straight path is convex in the endpoint, so the minimum is found
/// by nested golden-section searches.
inline TailExponent tail_exponent(const MarkModel& marks, double lambda, double qb, double qa, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("tail_exponent: t must be positive");
  TailExponent out;
  out.t = t;
  const Vec6 vbar = mean_vector(marks);
  const Vec2 drift = lambda * queue_map() * vbar;
  const Vec2 fluid_end(qb + drift[0] * t, qa + drift[1] * t);
  if (fluid_end[0] >= 0.0 && fluid_end[1] >= 0.0) {
    out.endpoint = fluid_end;
    return out;
  }
  auto cost = [&](double eb, double ea) {
    ++out.evaluations;
    const Vec2 y((eb - qb) / t, (ea - qa) / t);
    return t * segment_rate(marks, lambda, y, false).rate;
  };
  auto golden = [](auto&& f, double lo, double hi, double tol) {
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = lo, b = hi;
    double c = b - r * (b - a), d = a + r * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - r * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + r * (b - a);
        fd = f(d);
      }
    }
    const double x = 0.5 * (a + b);
    const double fx = f(x);
    // the minimum may sit on the lower end (a barely-positive endpoint)
    const double flo = f(lo);
    return flo <= fx ? std::pair{lo, flo} : std::pair{x, fx};
  };
  const double span_b = std::max(qb, std::fabs(fluid_end[0])) + qb + 1.0;
  const double span_a = std::max(qa, std::fabs(fluid_end[1])) + qa + 1.0;
  auto over_a = [&](double eb) { return golden([&](double ea) { return cost(eb, ea); }, 0.0, span_a, 1e-7 * span_a).second; };
  auto [eb, best] = golden(over_a, 0.0, span_b, 1e-7 * span_b);
  const double ea = golden([&](double e) { return cost(eb, e); }, 0.0, span_a, 1e-7 * span_a).first;
  out.endpoint = Vec2(eb, ea);
  out.exponent = -best;
  return out;
}

}  // namespace lobqueue
