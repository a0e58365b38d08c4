#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "diffusion.hpp"
#include "fluid.hpp"
#include "ldp.hpp"
#include "lob_simulator.hpp"
#include "order_flow.hpp"
#include "point_processes.hpp"
#include "rng.hpp"
#include "statistics.hpp"

namespace lobqueue {

/// One declared comparison. `rule` is one of
///   "se"   |value - target| <= tolerance * se
///   "abs"  |value - target| <= tolerance
///   "rel"  |value - target| <= tolerance * |target|
///   "min"  value >= target
///   "max"  value <= target
/// Soft checks are reported but do not fail the experiment.
struct Check {
  std::string name;
  double value = 0.0, target = 0.0, se = 0.0, tolerance = 0.0;
  std::string rule = "se";
  bool hard = true;
  bool pass = false;
};

inline Check make_check(std::string name, double value, double target, double se, double tolerance, std::string rule,
                        bool hard = true) {
  Check c{std::move(name), value, target, se, tolerance, std::move(rule), hard, false};
  const double diff = std::fabs(value - target);
  if (c.rule == "se")
    c.pass = diff <= tolerance * se;
  else if (c.rule == "abs")
    c.pass = diff <= tolerance;
  else if (c.rule == "rel")
    c.pass = diff <= tolerance * std::fabs(target);
  else if (c.rule == "min")
    c.pass = value >= target;
  else if (c.rule == "max")
    c.pass = value <= target;
  else
    throw std::invalid_argument("check: unknown rule " + c.rule);
  if (!std::isfinite(value)) c.pass = false;
  return c;
}

struct ExperimentReport {
  std::string name;
  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json sizes = nlohmann::json::object();
  nlohmann::json statistics = nlohmann::json::object();
  std::vector<Check> checks;
  double wall_seconds = 0.0;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass || !c.hard; });
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["parameters"] = parameters;
    j["sizes"] = sizes;
    j["statistics"] = statistics;
    j["checks"] = nlohmann::json::array();
    for (const auto& c : checks)
      j["checks"].push_back({{"name", c.name}, {"value", c.value}, {"target", c.target}, {"se", c.se},
                             {"tolerance", c.tolerance}, {"rule", c.rule}, {"hard", c.hard}, {"pass", c.pass}});
    j["passed"] = passed();
    j["wall_seconds"] = wall_seconds;
    return j;
  }

  std::string to_text() const {
    std::ostringstream os;
    char buf[512];
    os << name << (passed() ? "  PASS" : "  FAIL") << "  (" << sizes.dump() << ", " << wall_seconds << " s)\n";
    for (const auto& c : checks) {
      std::snprintf(buf, sizeof buf, "  %-4s %-44s value=%.10g target=%.10g se=%.3g rule=%s %g%s\n",
                    c.pass ? "ok" : "FAIL", c.name.c_str(), c.value, c.target, c.se, c.rule.c_str(), c.tolerance,
                    c.hard ? "" : " (soft)");
      os << buf;
    }
    return os.str();
  }
};

namespace detail {

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline Vec6 vec6(const nlohmann::json& j) {
  Vec6 v;
  for (int i = 0; i < 6; ++i) v[i] = j.at(i).get<double>();
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// fluid convergence

struct FluidExperimentConfig {
  FluidParams fluid = baseline_params();
  std::vector<double> n_list = {1e2, 1e3, 1e4};
  int paths = 20;
  double horizon_fraction = 0.9;  ///< errors measured on [0, fraction * tau]
  std::uint64_t seed = 1;
  unsigned workers = 1;
};

struct SupErrors {
  double qb = 0.0, qa = 0.0, z = 0.0;
  double max() const { return std::max({qb, qa, z}); }
};

/// Sup distance between a simulated path and the fluid solution on [0, horizon],
/// checked on both sides of every jump.
inline SupErrors path_sup_errors(const QueuePath& path, const FluidParams& f, double horizon) {
  SupErrors e;
  double qb = path.qb0, qa = path.qa0, z = path.z0;
  auto update = [&](double t, double b, double a, double zz) {
    const auto [fb, fa] = fluid_queues(f, t);
    const double fz = fluid_position(f, t);
    e.qb = std::max(e.qb, std::fabs(b - fb));
    e.qa = std::max(e.qa, std::fabs(a - fa));
    e.z = std::max(e.z, std::fabs(zz - fz));
  };
  for (const auto& ev : path.events) {
    if (ev.time > horizon) break;
    update(ev.time, qb, qa, z);
    qb = ev.qb;
    qa = ev.qa;
    z = ev.z;
    update(ev.time, qb, qa, z);
  }
  update(horizon, qb, qa, z);
  return e;
}

inline ExperimentReport fluid_convergence_experiment(const FluidExperimentConfig& cfg) {
  detail::Stopwatch sw;
  ExperimentReport rep;
  rep.name = "fluid_convergence";
  const auto h = fluid_hitting_times(cfg.fluid);
  const double horizon = cfg.horizon_fraction * h.tau;
  rep.parameters = {{"lambda", cfg.fluid.lambda},
                    {"vbar", std::vector<double>(cfg.fluid.vbar.data(), cfg.fluid.vbar.data() + 6)},
                    {"qb", cfg.fluid.qb}, {"qa", cfg.fluid.qa}, {"z", cfg.fluid.z},
                    {"horizon", horizon}, {"seed", cfg.seed}};
  rep.sizes = {{"n", cfg.n_list}, {"paths", cfg.paths}};
  const MarkModel marks = marks_for_mean(cfg.fluid.vbar);
  std::vector<double> med;
  nlohmann::json per_n = nlohmann::json::array();
  for (std::size_t k = 0; k < cfg.n_list.size(); ++k) {
    const double n = cfg.n_list[k];
    std::vector<SupErrors> errs(cfg.paths);
    parallel_for(cfg.paths, cfg.workers, [&](std::size_t p) {
      SimConfig sc;
      sc.arrival = Poisson{cfg.fluid.lambda};
      sc.marks = marks;
      sc.n = n;
      sc.qb0 = cfg.fluid.qb;
      sc.qa0 = cfg.fluid.qa;
      sc.z0 = cfg.fluid.z;
      sc.horizon = horizon;
      sc.seed = cfg.seed;
      sc.path_index = (std::uint64_t(k) << 32) | p;
      sc.continue_after_stop = false;
      errs[p] = path_sup_errors(simulate_path(sc), cfg.fluid, horizon);
    });
    std::vector<double> all, eb, ea, ez;
    for (const auto& e : errs) {
      all.push_back(e.max());
      eb.push_back(e.qb);
      ea.push_back(e.qa);
      ez.push_back(e.z);
    }
    med.push_back(detail::median(all));
    per_n.push_back({{"n", n}, {"median_sup_error", med.back()}, {"median_qb", detail::median(eb)},
                     {"median_qa", detail::median(ea)}, {"median_z", detail::median(ez)}});
  }
  rep.statistics["per_n"] = per_n;
  for (std::size_t k = 1; k < med.size(); ++k)
    rep.checks.push_back(make_check("decay n=" + std::to_string(long(cfg.n_list[k])), med[k], med[k - 1], 0.0, 0.0,
                                    "max"));
  if (med.size() >= 2 && cfg.n_list.back() >= 100.0 * cfg.n_list.front())
    rep.checks.push_back(make_check("factor first/last", med.front() / med.back(), 3.0, 0.0, 0.0, "min"));
  rep.wall_seconds = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// diffusion covariance

struct CovarianceExperimentConfig {
  ArrivalSpec arrival = Poisson{1.0};
  MarkModel marks = constant_marks({1, 1, 1, 1, 1, 1});
  double n = 1e3;
  int paths = 10000;
  PsiConvention convention = PsiConvention::exact;
  std::uint64_t seed = 2;
  unsigned workers = 1;
  double tolerance_se = 5.0;
};

/// Psi_n(1) = sqrt(n) (C_n(1) - lambda vbar) for independent paths.
inline std::vector<Vec6> sample_centered_flows(const CovarianceExperimentConfig& cfg) {
  const double lambda = stationary_rate(cfg.arrival);
  const Vec6 vbar = mean_vector(cfg.marks);
  const MarkSampler sampler(cfg.marks);
  std::vector<Vec6> out(cfg.paths);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t p) {
    ArrivalGenerator gen(cfg.arrival, Rng(cfg.seed, stream_id(StreamTag::arrivals, p)));
    Rng mark_rng(cfg.seed, stream_id(StreamTag::marks, p));
    std::array<double, 6> sums{};
    while (true) {
      const double s = gen.next(nullptr);
      if (s > cfg.n) break;
      const auto [j, v] = sampler(mark_rng);
      sums[j] += v;
    }
    Vec6 psi;
    for (int j = 0; j < 6; ++j) psi[j] = std::sqrt(cfg.n) * (sums[j] / cfg.n - lambda * vbar[j]);
    out[p] = psi;
  });
  return out;
}

inline ExperimentReport covariance_experiment(const CovarianceExperimentConfig& cfg) {
  detail::Stopwatch sw;
  ExperimentReport rep;
  rep.name = "covariance";
  const auto moments = flow_moments(cfg.marks, cfg.arrival, cfg.convention);
  rep.parameters = {{"arrival", arrival_name(cfg.arrival)}, {"lambda", moments.lambda}, {"vd2", moments.vd2},
                    {"convention", to_string(cfg.convention)}, {"seed", cfg.seed}};
  rep.sizes = {{"n", cfg.n}, {"paths", cfg.paths}};
  const auto flows = sample_centered_flows(cfg);
  const std::size_t batches = std::min<std::size_t>(50, flows.size());
  std::vector<std::vector<double>> cols(6, std::vector<double>(flows.size()));
  for (std::size_t p = 0; p < flows.size(); ++p)
    for (int j = 0; j < 6; ++j) cols[j][p] = flows[p][j];
  Mat6 cov;
  for (int i = 0; i < 6; ++i) {
    const double m = mean(cols[i]);
    const double se = batch_standard_error(cols[i], batches);
    rep.checks.push_back(make_check("mean psi" + std::to_string(i + 1), m, 0.0, se, cfg.tolerance_se, "se"));
  }
  for (int i = 0; i < 6; ++i)
    for (int j = i; j < 6; ++j) {
      cov(i, j) = cov(j, i) = covariance(cols[i], cols[j]);
      const double se = batched_statistic_se(flows.size(), batches, [&](std::size_t start, std::size_t len) {
        return covariance(std::span<const double>(cols[i]).subspan(start, len),
                          std::span<const double>(cols[j]).subspan(start, len));
      });
      rep.checks.push_back(make_check("cov psi" + std::to_string(i + 1) + std::to_string(j + 1), cov(i, j),
                                      moments.psi(i, j), se, cfg.tolerance_se, "se"));
    }
  rep.statistics["covariance"] = to_json(cov);
  rep.statistics["target"] = to_json(moments.psi);
  rep.wall_seconds = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// first exit of the diffusion from the quadrant

struct WedgeExit {
  double time = kInf;
  int side = -1;  ///< 0: ask side (theta = 0), 1: bid side (theta = alpha), -1: no exit seen
  std::vector<bool> alive;  ///< survival past each checkpoint
};

/// Euler scheme in whitened coordinates with a Brownian-bridge crossing test
/// against both sides of the wedge. Steps scale with the squared distance to the
/// boundary, floored at (floor_fraction * r0)^2.
inline WedgeExit simulate_wedge_exit(const DiffusionParams& d, Rng& rng, const std::vector<double>& checkpoints,
                                     double t_max, double step_fraction = 0.2, double floor_fraction = 2e-3,
                                     std::uint64_t max_steps = 20000000) {
  WedgeExit out;
  out.alive.assign(checkpoints.size(), false);
  const Vec2 kappa = d.kappa();
  const Vec2 w0 = d.start_whitened();
  double x = w0[0], y = w0[1];
  const double sa = std::sin(d.alpha), ca = std::cos(d.alpha);
  const double dt_floor = std::pow(floor_fraction * d.r0, 2);
  double t = 0.0;
  std::size_t next_cp = 0;
  for (std::uint64_t step = 0; step < max_steps; ++step) {
    const double d0 = y, d1 = x * sa - y * ca;
    double dt = std::max(dt_floor, std::pow(step_fraction * std::min(d0, d1), 2));
    double stop = t_max;
    if (next_cp < checkpoints.size()) stop = std::min(stop, checkpoints[next_cp]);
    bool hit_stop = false;
    if (t + dt >= stop) {
      dt = stop - t;
      hit_stop = true;
    }
    const double sq = std::sqrt(dt);
    const double nx = x + kappa[0] * dt + sq * rng.normal();
    const double ny = y + kappa[1] * dt + sq * rng.normal();
    const double e0 = ny, e1 = nx * sa - ny * ca;
    int side = -1;
    if (e0 <= 0.0 || e1 <= 0.0) {
      side = e0 <= e1 ? 0 : 1;
    } else {
      const double p0 = std::exp(-2.0 * d0 * e0 / dt), p1 = std::exp(-2.0 * d1 * e1 / dt);
      const double u0 = rng.uniform(), u1 = rng.uniform();
      const bool c0 = u0 < p0, c1 = u1 < p1;
      if (c0 && c1)
        side = p0 >= p1 ? 0 : 1;
      else if (c0)
        side = 0;
      else if (c1)
        side = 1;
    }
    if (side >= 0) {
      out.time = t + dt;
      out.side = side;
      return out;
    }
    x = nx;
    y = ny;
    t += dt;
    if (hit_stop) {
      if (next_cp < checkpoints.size() && t >= checkpoints[next_cp]) {
        out.alive[next_cp] = true;
        ++next_cp;
      }
      if (t >= t_max) return out;
    }
  }
  return out;
}

struct HittingExperimentConfig {
  DiffusionParams params = make_diffusion_params(Vec2(0, 0), 1, 1, 0, 1, 1);
  int paths = 100000;
  std::vector<double> survival_times = {0.1, 0.25, 0.5, 0.75, 1.0};
  double t_max = 1e7;  ///< exits later than this count as not observed
  std::uint64_t seed = 3;
  unsigned workers = 1;
  double tolerance_se = 3.0;
  bool check_survival = true;
};

inline ExperimentReport hitting_probability_experiment(const HittingExperimentConfig& cfg) {
  detail::Stopwatch sw;
  ExperimentReport rep;
  rep.name = "hitting_probability";
  const auto& d = cfg.params;
  rep.parameters = {{"mu", {d.mu[0], d.mu[1]}}, {"sigma1", d.sigma1}, {"sigma2", d.sigma2}, {"rho", d.rho},
                    {"qb", d.qb}, {"qa", d.qa}, {"alpha", d.alpha}, {"theta0", d.theta0}, {"r0", d.r0},
                    {"seed", cfg.seed}};
  rep.sizes = {{"paths", cfg.paths}};
  std::vector<WedgeExit> runs(cfg.paths);
  const std::vector<double> cps = cfg.check_survival ? cfg.survival_times : std::vector<double>{};
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t p) {
    Rng rng(cfg.seed, stream_id(StreamTag::diffusion, p));
    runs[p] = simulate_wedge_exit(d, rng, cps, cfg.t_max);
  });
  std::vector<double> bid(cfg.paths), unseen(cfg.paths);
  for (int p = 0; p < cfg.paths; ++p) {
    bid[p] = runs[p].side == 1 ? 1.0 : 0.0;
    unseen[p] = runs[p].side < 0 ? 1.0 : 0.0;
  }
  const auto pd = price_decrease_probability(d);
  const double freq = mean(bid);
  rep.checks.push_back(
      make_check("price decrease", freq, pd.value, batch_standard_error(bid, 50), cfg.tolerance_se, "se"));
  rep.statistics["no_exit_fraction"] = mean(unseen);
  rep.statistics["price_decrease_sub_probability"] = pd.sub_probability;
  nlohmann::json curve = nlohmann::json::array();
  for (std::size_t k = 0; k < cps.size(); ++k) {
    std::vector<double> alive(cfg.paths);
    for (int p = 0; p < cfg.paths; ++p) alive[p] = runs[p].alive[k] ? 1.0 : 0.0;
    const double target = survival_probability(d, cps[k]).value;
    const double m = mean(alive);
    rep.checks.push_back(make_check("survival t=" + std::to_string(cps[k]).substr(0, 5), m, target,
                                    batch_standard_error(alive, 50), cfg.tolerance_se, "se"));
    curve.push_back({cps[k], m, target});
  }
  rep.statistics["survival"] = curve;
  rep.wall_seconds = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// execution and depletion time fluctuations

struct TauExperimentConfig {
  FluidParams fluid = baseline_params();
  double n = 1e4;
  int paths = 10000;
  int depletion_paths = 0;  ///< bid-only runs for the depletion-time law (0 = skip)
  double vd2 = 1.0;         ///< Poisson counts
  PsiConvention convention = PsiConvention::exact;
  std::uint64_t seed = 4;
  unsigned workers = 1;
};

/// sqrt(n) (tau_n - tau) samples from the embedded mark chain. The k-th Poisson
/// arrival in scaled time is Gamma(k, n lambda).
inline std::vector<double> tau_samples(const FluidParams& f, double n, int paths, ChainTarget target,
                                       std::uint64_t seed, unsigned workers, int* other_stops = nullptr) {
  const MarkModel marks = marks_for_mean(f.vbar);
  const MarkSampler sampler(marks);
  const auto h = fluid_hitting_times(f);
  const double tau = target == ChainTarget::bid_only ? h.tau_b : (target == ChainTarget::ask_only ? h.tau_a : h.tau);
  const auto cancel = CancellationRule::uniform();
  std::vector<double> out(paths, std::numeric_limits<double>::quiet_NaN());
  std::vector<int> other(paths, 0);
  const std::uint64_t cap = std::uint64_t(std::ceil(n * f.lambda * tau * 4.0 + 1000.0));
  parallel_for(paths, workers, [&](std::size_t p) {
    Rng rng(seed, stream_id(StreamTag::marks, p));
    Rng clock(seed, stream_id(StreamTag::aux, p));
    const auto stop = run_mark_chain(sampler, rng, n, f.qb, f.qa, f.z, cancel, target, cap);
    if (stop.events == 0) return;
    if (target == ChainTarget::truncated && !stop.position) other[p] = 1;
    const double t = clock.gamma(double(stop.events), n * f.lambda);
    out[p] = std::sqrt(n) * (t - tau);
  });
  if (other_stops) *other_stops = std::accumulate(other.begin(), other.end(), 0);
  return out;
}

inline ExperimentReport tau_fluctuation_experiment(const TauExperimentConfig& cfg) {
  detail::Stopwatch sw;
  ExperimentReport rep;
  rep.name = "tau_fluctuation";
  const auto& f = cfg.fluid;
  const auto h = fluid_hitting_times(f);
  const auto k = fluid_constants(f);
  const auto moments = flow_moments(marks_for_mean(f.vbar), f.lambda, cfg.vd2, cfg.convention);
  rep.parameters = {{"lambda", f.lambda}, {"qb", f.qb}, {"qa", f.qa}, {"z", f.z},
                    {"vbar", std::vector<double>(f.vbar.data(), f.vbar.data() + 6)},
                    {"convention", to_string(cfg.convention)}, {"tau_z", h.tau_z}, {"seed", cfg.seed}};
  rep.sizes = {{"n", cfg.n}, {"paths", cfg.paths}, {"depletion_paths", cfg.depletion_paths}};
  if (!(h.tau_z < h.tau_b && h.tau_z < h.tau_a))
    throw std::invalid_argument("tau_fluctuation_experiment: the order must execute before either queue empties");
  const double var = fluctuation_variance(f, moments, h.tau_z, VarianceMode::quadrature);
  const double sd = std::sqrt(var) / k.a;
  rep.statistics["sigma_y2"] = var;
  rep.statistics["sd_limit"] = sd;
  int other = 0;
  auto xs = tau_samples(f, cfg.n, cfg.paths, ChainTarget::truncated, cfg.seed, cfg.workers, &other);
  xs.erase(std::remove_if(xs.begin(), xs.end(), [](double v) { return std::isnan(v); }), xs.end());
  rep.statistics["other_stops"] = other;
  rep.statistics["sample_mean"] = mean(xs);
  rep.statistics["sample_sd"] = std::sqrt(variance(xs));
  const auto ks = ks_test(xs, [&](double x) { return normal_cdf(x / sd); });
  rep.statistics["ks_statistic"] = ks.statistic;
  rep.checks.push_back(make_check("execution KS p-value", ks.p_value, 0.01, 0, 0, "min"));
  for (double x0 : {0.0, -10.0}) {
    std::vector<double> ind(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) ind[i] = xs[i] >= x0 ? 1.0 : 0.0;
    rep.checks.push_back(make_check("tail at x=" + std::to_string(int(x0)), mean(ind),
                                    execution_time_fluct_cdf(k.a, std::sqrt(var), x0), batch_standard_error(ind, 50),
                                    3.0, "se"));
  }
  if (cfg.depletion_paths > 0) {
    auto ys = tau_samples(f, cfg.n, cfg.depletion_paths, ChainTarget::bid_only, cfg.seed + 1, cfg.workers);
    ys.erase(std::remove_if(ys.begin(), ys.end(), [](double v) { return std::isnan(v); }), ys.end());
    for (auto form : {DepletionScale::corrected, DepletionScale::displayed}) {
      const double s = depletion_time_sd(Side::bid, f, moments.psi, form);
      const auto r = ks_test(ys, [&](double x) { return normal_cdf(x / s); });
      const std::string tag = form == DepletionScale::corrected ? "corrected" : "displayed";
      rep.statistics["depletion_sd_" + tag] = s;
      rep.checks.push_back(make_check("depletion KS distance (" + tag + ")", r.statistic, 0.05, 0, 0, "max",
                                      form == DepletionScale::corrected));
    }
    rep.statistics["depletion_sample_sd"] = std::sqrt(variance(ys));
  }
  rep.wall_seconds = sw.seconds();
  return rep;
}

/// n Var(Z_n(t) - Z(t)) against sigma_Y^2(t) (baseline regime, Poisson clock).
struct SigmaYExperimentConfig {
  FluidParams fluid = baseline_params();
  double n = 1e3;
  double t = 50.0;
  int paths = 20000;
  std::uint64_t seed = 5;
  unsigned workers = 1;
  double tolerance_rel = 0.1;
};

inline ExperimentReport sigma_y_experiment(const SigmaYExperimentConfig& cfg) {
  detail::Stopwatch sw;
  ExperimentReport rep;
  rep.name = "sigma_y";
  const auto& f = cfg.fluid;
  const MarkModel marks = marks_for_mean(f.vbar);
  const MarkSampler sampler(marks);
  const auto moments = flow_moments(marks, f.lambda, 1.0, PsiConvention::exact);
  rep.parameters = {{"t", cfg.t}, {"seed", cfg.seed}};
  rep.sizes = {{"n", cfg.n}, {"paths", cfg.paths}};
  const double zt = fluid_position(f, cfg.t);
  std::vector<double> y(cfg.paths);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t p) {
    Rng rng(cfg.seed, stream_id(StreamTag::marks, p));
    Rng clock(cfg.seed, stream_id(StreamTag::aux, p));
    const auto count = clock.poisson(cfg.n * f.lambda * cfg.t);
    const auto s = advance_mark_chain(sampler, rng, cfg.n, {f.qb, f.qa, f.z}, CancellationRule::uniform(), count);
    y[p] = std::sqrt(cfg.n) * (s.z - zt);
  });
  const double v = variance(y);
  const double target = fluctuation_variance(f, moments, cfg.t, VarianceMode::quadrature);
  const double closed = fluctuation_variance(f, moments, cfg.t, VarianceMode::closed_form);
  rep.statistics["closed_form"] = closed;
  rep.checks.push_back(make_check("n Var(Z_n - Z)", v, target, 0, cfg.tolerance_rel, "rel"));
  rep.checks.push_back(make_check("closed form vs quadrature", closed, target, 0, 1e-6, "rel", false));
  rep.wall_seconds = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// Example 1: the +-1 Markov chain with P(stay) = 3/4 and Y_n = prod (1 + X_i / sqrt n)

struct Example1Config {
  int paths = 100000;
  long n = 10000;
  std::uint64_t seed = 6;
  unsigned workers = 1;
};

/// E[prod_i w(X_i)] over the stationary chain, by the transfer matrix (log-scaled).
inline double example1_exact_moment(long n, double wp, double wm) {
  const double stay = 0.75, move = 0.25;
  double a = 0.5 * wp, b = 0.5 * wm;  // mass ending at +1 / -1
  double log_scale = 0.0;
  for (long i = 1; i < n; ++i) {
    const double na = (a * stay + b * move) * wp;
    const double nb = (a * move + b * stay) * wm;
    const double s = na + nb;
    a = na / s;
    b = nb / s;
    log_scale += std::log(s);
  }
  return std::exp(log_scale + std::log(a + b));
}

inline ExperimentReport example1_demo(const Example1Config& cfg) {
  detail::Stopwatch sw;
  ExperimentReport rep;
  rep.name = "example1";
  const long n = cfg.n;
  const double eps = 1.0 / std::sqrt(double(n));
  rep.parameters = {{"stay_probability", 0.75}, {"seed", cfg.seed}};
  rep.sizes = {{"n", n}, {"paths", cfg.paths}};
  // exponential tilt e^{theta x} with theta = 2 eps; Perron pair of P(x,y) e^{theta y}
  const double theta = 2.0 * eps;
  const double ep = std::exp(theta), em = std::exp(-theta);
  // M = [[.75 ep, .25 em], [.25 ep, .75 em]]
  const double tr = 0.75 * (ep + em), det = 0.5 * (ep * em) * (0.75 * 0.75 - 0.25 * 0.25) * 2.0;
  const double rho = 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
  const double hp = 1.0, hm = (rho - 0.75 * ep) / (0.25 * em);  // from the first row of M h = rho h
  const double q_pp = 0.75 * ep * hp / (rho * hp), q_mp = 0.25 * ep * hp / (rho * hm);
  const double c0 = 0.5 * ep * hp + 0.5 * em * hm;
  const double init_p = 0.5 * ep * hp / c0;
  const double wp2 = (1.0 + eps) * (1.0 + eps), wm2 = (1.0 - eps) * (1.0 - eps);
  const double log_up = std::log1p(eps), log_down = std::log1p(-eps);

  std::vector<double> y1(cfg.paths), y2(cfg.paths), is2(cfg.paths), s2(cfg.paths);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t p) {
    // plain chain
    Rng rng(cfg.seed, stream_id(StreamTag::example1, 2 * p));
    int x = rng.uniform32() < 0.5 ? 1 : -1;
    long ups = 0;
    for (long i = 0; i < n; ++i) {
      if (i > 0 && rng.uniform32() >= 0.75) x = -x;
      ups += x == 1;
    }
    const long sum = 2 * ups - n;
    const double log_y = double(ups) * log_up + double(n - ups) * log_down;
    y1[p] = std::exp(log_y);
    y2[p] = std::exp(2.0 * log_y);
    s2[p] = double(sum) * double(sum) / double(n);
    // tilted chain, weight prod w(x_i) dP/dQ = prod w(x_i) e^{-theta x_i} c0 rho^{n-1} / h(x_n)
    Rng trng(cfg.seed, stream_id(StreamTag::example1, 2 * p + 1));
    x = trng.uniform32() < init_p ? 1 : -1;
    long tilted_ups = x == 1;
    for (long i = 1; i < n; ++i) {
      const double up = x == 1 ? q_pp : q_mp;  // probability of moving to +1
      x = trng.uniform32() < up ? 1 : -1;
      tilted_ups += x == 1;
    }
    const long tilted_sum = 2 * tilted_ups - n;
    double log_w = 2.0 * (double(tilted_ups) * log_up + double(n - tilted_ups) * log_down) - theta * double(tilted_sum);
    log_w += std::log(c0) + double(n - 1) * std::log(rho) - std::log(x == 1 ? hp : hm);
    is2[p] = std::exp(log_w);
  });
  const double e5 = std::exp(5.0), e3 = std::exp(3.0);
  const double exact2 = example1_exact_moment(n, wp2, wm2);
  const double exact1 = example1_exact_moment(n, 1.0 + eps, 1.0 - eps);
  const double m_is = mean(is2), se_is = batch_standard_error(is2, 50);
  const double m_plain = mean(y2), se_plain = batch_standard_error(y2, 50);
  const double m1 = mean(y1), se1 = batch_standard_error(y1, 50);
  rep.statistics = {{"second_moment_importance", m_is},  {"second_moment_importance_se", se_is},
                    {"second_moment_plain", m_plain},    {"second_moment_plain_se", se_plain},
                    {"second_moment_exact_n", exact2},   {"mean_exact_n", exact1},
                    {"correct_limit", e5},               {"naive_limit", e3},
                    {"mean_plain", m1},                  {"mean_plain_se", se1},
                    {"chain_variance", mean(s2)}};
  rep.checks.push_back(make_check("E[Y^2] vs exact finite n", m_is, exact2, se_is, 5.0, "se"));
  rep.checks.push_back(make_check("closer to e^5 than e^3", std::fabs(m_is - e3) - std::fabs(m_is - e5), 0.0, 0, 0,
                                  "min"));
  rep.checks.push_back(make_check("SEs from naive e^3", std::fabs(m_is - e3) / se_is, 10.0, 0, 0, "min"));
  rep.checks.push_back(make_check("E[Y] vs exact finite n", m1, exact1, se1, 5.0, "se"));
  rep.checks.push_back(make_check("sigma^2 of chain", mean(s2), 3.0, 0, 0.05, "rel"));
  rep.checks.push_back(make_check("plain MC E[Y^2] vs exact", m_plain, exact2, se_plain, 5.0, "se", false));
  rep.wall_seconds = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// pathwise Z <= Q^b

struct LemmaExperimentConfig {
  FluidParams fluid = baseline_params();
  double n = 100.0;
  int paths = 100000;
  std::uint64_t seed = 7;
  unsigned workers = 1;
};

inline ExperimentReport lemma_experiment(const LemmaExperimentConfig& cfg) {
  detail::Stopwatch sw;
  ExperimentReport rep;
  rep.name = "position_below_queue";
  const auto& f = cfg.fluid;
  rep.parameters = {{"qb", f.qb}, {"qa", f.qa}, {"z", f.z}, {"seed", cfg.seed}};
  rep.sizes = {{"n", cfg.n}, {"paths", cfg.paths}};
  const MarkSampler sampler(marks_for_mean(f.vbar));
  const auto cancel = CancellationRule::uniform();
  const std::uint64_t cap = std::uint64_t(cfg.n * f.lambda * 1e3 + 1e6);
  std::vector<int> bad(cfg.paths, 0), unfinished(cfg.paths, 0);
  parallel_for(cfg.paths, cfg.workers, [&](std::size_t p) {
    Rng rng(cfg.seed, stream_id(StreamTag::marks, p));
    const auto s = run_mark_chain(sampler, rng, cfg.n, f.qb, f.qa, f.z, cancel, ChainTarget::truncated, cap);
    if (s.events == 0) unfinished[p] = 1;
    if (!s.lemma_ok) bad[p] = 1;
  });
  const double violations = std::accumulate(bad.begin(), bad.end(), 0.0);
  rep.statistics["unfinished"] = std::accumulate(unfinished.begin(), unfinished.end(), 0);
  rep.checks.push_back(make_check("paths with Z > Q^b or tau_z > tau_b", violations, 0.0, 0, 0, "abs"));
  rep.wall_seconds = sw.seconds();
  return rep;
}

// ---------------------------------------------------------------------------
// suites

inline const std::vector<std::string>& suite_names() {
  static const std::vector<std::string> names = {"fluid",   "covariance", "hitting", "tau",
                                                 "sigma_y", "lemma",      "example1"};
  return names;
}

/// Runs one named suite (or "all"). `full` uses the sample sizes of the
/// acceptance criteria; `quick` is a smoke-sized run of the same checks.
inline std::vector<ExperimentReport> run_suite(const std::string& name, bool full, std::uint64_t seed,
                                               unsigned workers) {
  std::vector<std::string> todo;
  if (name == "all")
    todo = suite_names();
  else if (std::find(suite_names().begin(), suite_names().end(), name) != suite_names().end())
    todo = {name};
  else
    throw std::invalid_argument("unknown suite '" + name + "'");
  std::vector<ExperimentReport> out;
  for (const auto& s : todo) {
    if (s == "fluid") {
      FluidExperimentConfig c;
      c.seed = seed;
      c.workers = workers;
      if (!full) c.n_list = {1e2, 1e3};
      out.push_back(fluid_convergence_experiment(c));
    } else if (s == "covariance") {
      CovarianceExperimentConfig c;
      c.seed = seed;
      c.workers = workers;
      c.paths = full ? 10000 : 2000;
      out.push_back(covariance_experiment(c));
    } else if (s == "hitting") {
      HittingExperimentConfig c;
      c.seed = seed;
      c.workers = workers;
      c.paths = full ? 100000 : 5000;
      out.push_back(hitting_probability_experiment(c));
      c.params = make_diffusion_params(Vec2(0, 0), 1, 1, 0, std::sqrt(3.0), 1);
      c.check_survival = false;
      out.push_back(hitting_probability_experiment(c));
      out.back().name = "hitting_probability_third";
      c.params = make_diffusion_params(Vec2(-0.1, -0.1), 1, 1, 0, 1, 1);
      out.push_back(hitting_probability_experiment(c));
      out.back().name = "hitting_probability_drift";
    } else if (s == "tau") {
      TauExperimentConfig c;
      c.seed = seed;
      c.workers = workers;
      c.n = full ? 1e4 : 1e3;
      c.paths = full ? 10000 : 2000;
      c.depletion_paths = full ? 0 : 1000;
      out.push_back(tau_fluctuation_experiment(c));
    } else if (s == "sigma_y") {
      SigmaYExperimentConfig c;
      c.seed = seed;
      c.workers = workers;
      c.paths = full ? 20000 : 4000;
      out.push_back(sigma_y_experiment(c));
    } else if (s == "lemma") {
      LemmaExperimentConfig c;
      c.seed = seed;
      c.workers = workers;
      c.paths = full ? 100000 : 5000;
      out.push_back(lemma_experiment(c));
    } else if (s == "example1") {
      Example1Config c;
      c.seed = seed;
      c.workers = workers;
      c.paths = full ? 100000 : 5000;
      out.push_back(example1_demo(c));
    }
  }
  return out;
}

}  // namespace lobqueue
