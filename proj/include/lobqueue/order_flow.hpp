#pragma once

#include <array>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "numerics.hpp"
#include "point_processes.hpp"
#include "rng.hpp"

namespace lobqueue {

using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

/// Order types in the order bb, mbb, cbb, ba, mba, cba:
/// limit/market/cancel on the bid side, then the same on the ask side.
inline constexpr std::array<const char*, 6> kTypeNames = {"bb", "mbb", "cbb", "ba", "mba", "cba"};

struct ConstantSize {
  double value = 1.0;
};
struct ExponentialSize {
  double mean = 1.0;
};
/// Sizes on {1, 2, ...} with P(k) = (1-q) q^(k-1), q = 1 - 1/mean.
struct GeometricSize {
  double mean = 1.0;
};
struct LogNormalSize {
  double mu = 0.0;
  double sigma = 1.0;
};

using SizeLaw = std::variant<ConstantSize, ExponentialSize, GeometricSize, LogNormalSize>;

inline void validate(const SizeLaw& law) {
  auto bad = [](const std::string& m) { throw std::invalid_argument("invalid size law: " + m); };
  if (auto c = std::get_if<ConstantSize>(&law)) {
    if (!(c->value > 0.0) || !std::isfinite(c->value)) bad("constant size must be positive");
  } else if (auto e = std::get_if<ExponentialSize>(&law)) {
    if (!(e->mean > 0.0) || !std::isfinite(e->mean)) bad("exponential mean must be positive");
  } else if (auto g = std::get_if<GeometricSize>(&law)) {
    if (!(g->mean >= 1.0) || !std::isfinite(g->mean)) bad("geometric mean must be at least 1");
  } else {
    const auto& l = std::get<LogNormalSize>(law);
    if (!(l.sigma > 0.0) || !std::isfinite(l.mu) || !std::isfinite(l.sigma)) bad("lognormal sigma must be positive");
  }
}

inline double size_mean(const SizeLaw& law) {
  if (auto c = std::get_if<ConstantSize>(&law)) return c->value;
  if (auto e = std::get_if<ExponentialSize>(&law)) return e->mean;
  if (auto g = std::get_if<GeometricSize>(&law)) return g->mean;
  const auto& l = std::get<LogNormalSize>(law);
  return std::exp(l.mu + 0.5 * l.sigma * l.sigma);
}

inline double size_second_moment(const SizeLaw& law) {
  if (auto c = std::get_if<ConstantSize>(&law)) return c->value * c->value;
  if (auto e = std::get_if<ExponentialSize>(&law)) return 2.0 * e->mean * e->mean;
  if (auto g = std::get_if<GeometricSize>(&law)) return 2.0 * g->mean * g->mean - g->mean;
  const auto& l = std::get<LogNormalSize>(law);
  return std::exp(2.0 * l.mu + 2.0 * l.sigma * l.sigma);
}

inline double sample_size(const SizeLaw& law, Rng& rng) {
  switch (law.index()) {
    case 0: return std::get<ConstantSize>(law).value;
    case 1: return std::get<ExponentialSize>(law).mean * rng.exponential();
    case 2: {
      const double m = std::get<GeometricSize>(law).mean;
      if (m == 1.0) return 1.0;
      const double q = 1.0 - 1.0 / m;
      return 1.0 + std::floor(std::log(rng.uniform()) / std::log(q));
    }
    default: {
      const auto& l = std::get<LogNormalSize>(law);
      return std::exp(l.mu + l.sigma * rng.normal());
    }
  }
}

/// Where the moment generating function E[exp(theta S)] is finite.
struct MgfDomain {
  double upper = std::numeric_limits<double>::infinity();
  bool inclusive = false;  ///< finite at the upper end itself

  bool contains(double theta) const { return inclusive ? theta <= upper : theta < upper; }
};

inline MgfDomain mgf_domain(const SizeLaw& law) {
  switch (law.index()) {
    case 0: return {};
    case 1: return {1.0 / std::get<ExponentialSize>(law).mean, false};
    case 2: {
      const double m = std::get<GeometricSize>(law).mean;
      if (m == 1.0) return {};
      return {-std::log(1.0 - 1.0 / m), false};
    }
    default: return {0.0, true};
  }
}

/// Derivatives k = 0, 1, 2 of the size MGF at theta; +inf outside the domain.
inline std::array<double, 3> size_mgf(const SizeLaw& law, double theta) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  if (!mgf_domain(law).contains(theta)) return {inf, inf, inf};
  switch (law.index()) {
    case 0: {
      const double s = std::get<ConstantSize>(law).value;
      const double e = std::exp(s * theta);
      return {e, s * e, s * s * e};
    }
    case 1: {
      const double m = std::get<ExponentialSize>(law).mean;
      const double d = 1.0 - m * theta;
      return {1.0 / d, m / (d * d), 2.0 * m * m / (d * d * d)};
    }
    case 2: {
      const double m = std::get<GeometricSize>(law).mean;
      const double q = 1.0 - 1.0 / m;
      const double e = std::exp(theta);
      const double u = q * e, d = 1.0 - u;
      const double base = (1.0 - q) * e;
      return {base / d, base / (d * d), base * (1.0 + u) / (d * d * d)};
    }
    default: {
      const auto& l = std::get<LogNormalSize>(law);
      if (theta == 0.0) return {1.0, size_mean(law), size_second_moment(law)};
      std::array<double, 3> out{};
      for (int k = 0; k < 3; ++k) {
        auto f = [&](double z) {
          const double s = std::exp(l.mu + l.sigma * z);
          return std::exp(-0.5 * z * z + theta * s) * std::pow(s, k) * 0.3989422804014327;
        };
        out[k] = integrate(f, -40.0, 40.0, 1e-15, 1e-13).value;
      }
      return out;
    }
  }
}

inline std::string size_law_name(const SizeLaw& law) {
  switch (law.index()) {
    case 0: return "constant";
    case 1: return "exponential";
    case 2: return "geometric";
    default: return "lognormal";
  }
}

/// Maps the six flows to (bid, ask) queue changes.
inline Eigen::Matrix<double, 2, 6> queue_map() {
  Eigen::Matrix<double, 2, 6> a;
  a << 1, -1, -1, 0, 0, 0,
       0, 0, 0, 1, -1, -1;
  return a;
}

/// I.i.d. marks: a type j drawn with probability p_j, then a size from law j;
/// the mark vector has that size in coordinate j and zeros elsewhere.
struct MarkModel {
  std::array<double, 6> p{};
  std::array<SizeLaw, 6> laws{};
};

inline void validate(const MarkModel& m) {
  double s = 0.0;
  for (double v : m.p) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::invalid_argument("invalid mark model: probabilities must be nonnegative");
    s += v;
  }
  if (std::fabs(s - 1.0) > 1e-12) throw std::invalid_argument("invalid mark model: probabilities must sum to 1");
  for (const auto& law : m.laws) validate(law);
}

/// p uniform and constant sizes.
inline MarkModel constant_marks(const std::array<double, 6>& sizes, const std::array<double, 6>& p = {
                                                                        1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6, 1.0 / 6}) {
  MarkModel m;
  m.p = p;
  for (int j = 0; j < 6; ++j) m.laws[j] = ConstantSize{sizes[j]};
  return m;
}

/// Marks reproducing a given mean vector with p_j = 1/6 and constant sizes 6 vbar_j.
inline MarkModel marks_for_mean(const Vec6& vbar) {
  std::array<double, 6> sizes{};
  for (int j = 0; j < 6; ++j) sizes[j] = 6.0 * vbar[j];
  return constant_marks(sizes);
}

/// Fast categorical sampler over a fixed model.
class MarkSampler {
 public:
  explicit MarkSampler(const MarkModel& m) : model_(m) {
    validate(m);
    double c = 0.0;
    int last = 0;
    for (int j = 0; j < 6; ++j) {
      c += m.p[j];
      cum_[j] = c;
      if (m.p[j] > 0.0) last = j;
    }
    for (int j = last; j < 6; ++j) cum_[j] = 2.0;
    all_constant_ = true;
    for (int j = 0; j < 6; ++j) {
      if (auto cs = std::get_if<ConstantSize>(&m.laws[j]))
        constant_[j] = cs->value;
      else
        all_constant_ = false;
    }
  }

  /// Draws (type, size) with type in 0..5.
  std::pair<int, double> operator()(Rng& rng) const {
    const double u = rng.uniform32();
    int j = 0;
    while (u >= cum_[j]) ++j;
    const double s = all_constant_ ? constant_[j] : sample_size(model_.laws[j], rng);
    return {j, s};
  }

  const MarkModel& model() const { return model_; }

 private:
  MarkModel model_;
  std::array<double, 6> cum_{};
  std::array<double, 6> constant_{};
  bool all_constant_ = false;
};

inline std::vector<Vec6> sample_marks(const MarkModel& model, long long count, std::uint64_t seed) {
  if (count < 0) throw std::invalid_argument("sample_marks: count must be nonnegative");
  MarkSampler sampler(model);
  Rng rng(seed, stream_id(StreamTag::marks, 0));
  std::vector<Vec6> out(std::size_t(count), Vec6::Zero());
  for (auto& v : out) {
    const auto [j, s] = sampler(rng);
    v[j] = s;
  }
  return out;
}

inline Vec6 mean_vector(const MarkModel& model) {
  validate(model);
  Vec6 v;
  for (int j = 0; j < 6; ++j) v[j] = model.p[j] * size_mean(model.laws[j]);
  return v;
}

struct LongRunCovariance {
  Vec6 v2;  ///< long-run variances
  Mat6 rho; ///< correlations (zero where a variance vanishes)
  Mat6 a;   ///< long-run covariance matrix
};

/// For i.i.d. marks the lag terms vanish and a = Cov(V_1).
inline LongRunCovariance long_run_covariance(const MarkModel& model) {
  const Vec6 vbar = mean_vector(model);
  LongRunCovariance out;
  out.a = -vbar * vbar.transpose();
  for (int j = 0; j < 6; ++j) out.a(j, j) += model.p[j] * size_second_moment(model.laws[j]);
  out.v2 = out.a.diagonal();
  for (int j = 0; j < 6; ++j)
    for (int k = 0; k < 6; ++k) {
      const double d = std::sqrt(out.v2[j] * out.v2[k]);
      out.rho(j, k) = d > 0.0 ? out.a(j, k) / d : 0.0;
    }
  return out;
}

/// Lower-triangular factor S with S S^T = a. Negative eigenvalues are clipped
/// at zero first; the clipped mass is reported through `clipped`.
inline Mat6 sigma_factor(const Mat6& a, double* clipped = nullptr) {
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-10 * std::max(1.0, a.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("sigma_factor: matrix is not symmetric");
  const Mat6 sym = 0.5 * (a + a.transpose());
  Eigen::SelfAdjointEigenSolver<Mat6> es(sym);
  Vec6 ev = es.eigenvalues();
  double lost = 0.0;
  for (int i = 0; i < 6; ++i)
    if (ev[i] < 0.0) {
      lost -= ev[i];
      ev[i] = 0.0;
    }
  Mat6 b = sym;
  if (lost > 0.0) b = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  if (clipped) *clipped = lost;
  if (lost > 1e-8 * std::max(sym.trace(), 1e-300))
    std::clog << "warning: sigma_factor clipped negative eigenvalue mass " << lost << "\n";
  // Cholesky that tolerates a semidefinite input
  Mat6 s = Mat6::Zero();
  const double tiny = 1e-14 * std::max(b.diagonal().maxCoeff(), 1e-300);
  for (int j = 0; j < 6; ++j) {
    double d = b(j, j);
    for (int k = 0; k < j; ++k) d -= s(j, k) * s(j, k);
    if (d <= tiny) continue;
    s(j, j) = std::sqrt(d);
    for (int i = j + 1; i < 6; ++i) {
      double v = b(i, j);
      for (int k = 0; k < j; ++k) v -= s(i, k) * s(j, k);
      s(i, j) = v / s(j, j);
    }
  }
  return s;
}

/// How the arrival-count variance enters psi.
enum class PsiConvention {
  exact,              ///< lambda a + vd2 vbar vbar^T: the covariance rate of the centred flow
  lambda_linear,  ///< lambda a + lambda vd2 vbar vbar^T
  lambda_cubed,        ///< lambda a + lambda^3 vd2 vbar vbar^T
};

inline std::string to_string(PsiConvention c) {
  switch (c) {
    case PsiConvention::exact: return "exact";
    case PsiConvention::lambda_linear: return "lambda-linear";
    default: return "lambda-cubed";
  }
}

inline PsiConvention psi_convention_from_string(const std::string& s) {
  if (s == "exact") return PsiConvention::exact;
  if (s == "lambda-linear" || s == "lambda_linear") return PsiConvention::lambda_linear;
  if (s == "lambda-cubed" || s == "lambda_cubed") return PsiConvention::lambda_cubed;
  throw std::invalid_argument("unknown psi convention '" + s + "'");
}

inline Mat6 psi_matrix(const Mat6& sigma, const Vec6& vbar, double vd2, double lambda,
                       PsiConvention conv = PsiConvention::exact) {
  double w = vd2;
  if (conv == PsiConvention::lambda_linear) w *= lambda;
  if (conv == PsiConvention::lambda_cubed) w *= lambda * lambda * lambda;
  return lambda * sigma * sigma.transpose() + w * vbar * vbar.transpose();
}

struct FlowMoments {
  Vec6 vbar;
  Vec6 v2;
  Mat6 rho;
  Mat6 a;
  Mat6 sigma;
  Mat6 psi;
  double lambda = 1.0;
  double vd2 = 1.0;
  PsiConvention convention = PsiConvention::exact;
};

inline FlowMoments flow_moments(const MarkModel& marks, double lambda, double vd2,
                                PsiConvention conv = PsiConvention::exact) {
  FlowMoments f;
  f.vbar = mean_vector(marks);
  const auto lr = long_run_covariance(marks);
  f.v2 = lr.v2;
  f.rho = lr.rho;
  f.a = lr.a;
  f.sigma = sigma_factor(lr.a);
  f.lambda = lambda;
  f.vd2 = vd2;
  f.convention = conv;
  f.psi = psi_matrix(f.sigma, f.vbar, vd2, lambda, conv);
  return f;
}

inline FlowMoments flow_moments(const MarkModel& marks, const ArrivalSpec& arrivals,
                                PsiConvention conv = PsiConvention::exact) {
  return flow_moments(marks, stationary_rate(arrivals), clt_variance(arrivals), conv);
}

inline nlohmann::json to_json(const Vec6& v) { return std::vector<double>(v.data(), v.data() + 6); }

inline nlohmann::json to_json(const Mat6& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < 6; ++i) rows.push_back(to_json(Vec6(m.row(i).transpose())));
  return rows;
}

inline nlohmann::json to_json(const FlowMoments& f) {
  return {{"vbar", to_json(f.vbar)}, {"v2", to_json(f.v2)},     {"rho", to_json(f.rho)},
          {"a", to_json(f.a)},       {"sigma", to_json(f.sigma)}, {"psi", to_json(f.psi)},
          {"lambda", f.lambda},      {"vd2", f.vd2},              {"convention", to_string(f.convention)}};
}

}  // namespace lobqueue
