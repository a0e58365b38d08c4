#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "order_flow.hpp"
#include "point_processes.hpp"
#include "rng.hpp"

namespace lobqueue {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Cancellation profile: a type-3 order of scaled size d removes d * profile(Z/Q^b)
/// from the volume ahead of the tracked order.
struct CancellationRule {
  enum class Kind { uniform, custom };
  Kind kind = Kind::uniform;
  std::function<double(double)> profile;
  double lipschitz = 1.0;

  static CancellationRule uniform() { return {}; }
  static CancellationRule custom(std::function<double(double)> f, double lipschitz_constant) {
    CancellationRule r;
    r.kind = Kind::custom;
    r.profile = std::move(f);
    r.lipschitz = lipschitz_constant;
    return r;
  }

  /// Profile value; arguments above 1 map to 1 and below 0 to 0.
  double operator()(double x) const {
    if (kind == Kind::uniform) return std::clamp(x, 0.0, 1.0);
    if (x >= 1.0) return 1.0;
    if (x <= 0.0) return 0.0;
    return profile(x);
  }
};

inline void validate(const CancellationRule& r) {
  if (r.kind == CancellationRule::Kind::uniform) return;
  if (!r.profile) throw std::invalid_argument("invalid cancellation rule: missing profile");
  if (!(r.lipschitz > 0.0)) throw std::invalid_argument("invalid cancellation rule: Lipschitz constant must be positive");
  if (std::fabs(r.profile(0.0)) > 1e-12 || std::fabs(r.profile(1.0) - 1.0) > 1e-12)
    throw std::invalid_argument("invalid cancellation rule: need profile(0) = 0 and profile(1) = 1");
  double prev = r.profile(0.0);
  const int grid = 1000;
  for (int i = 1; i <= grid; ++i) {
    const double x = double(i) / grid;
    const double v = r.profile(x);
    if (v < prev - 1e-12) throw std::invalid_argument("invalid cancellation rule: profile must be nondecreasing");
    if (v > 1.0 + 1e-12) throw std::invalid_argument("invalid cancellation rule: profile must map into [0,1]");
    if (v - prev > r.lipschitz / grid * (1.0 + 1e-9) + 1e-12)
      throw std::invalid_argument("invalid cancellation rule: profile exceeds its Lipschitz constant");
    prev = v;
  }
}

struct SimConfig {
  ArrivalSpec arrival = Poisson{1.0};
  MarkModel marks;
  double n = 1.0;        ///< scale parameter
  double qb0 = 1.0;
  double qa0 = 1.0;
  double z0 = 1.0;
  double horizon = 1.0;  ///< in scaled time
  CancellationRule cancellation;
  std::uint64_t seed = 1;
  std::uint64_t path_index = 0;   ///< selects the RNG streams of this path
  bool record_events = true;
  bool continue_after_stop = true; ///< keep drawing events after the stop so flows cover the horizon
};

inline void validate(const SimConfig& c) {
  validate(c.arrival);
  validate(c.marks);
  validate(c.cancellation);
  if (!(c.n >= 1.0) || !std::isfinite(c.n)) throw std::invalid_argument("invalid config: n must be >= 1");
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) throw std::invalid_argument("invalid config: horizon must be positive");
  if (!(c.qb0 >= 0.0) || !(c.qa0 >= 0.0) || !(c.z0 >= 0.0)) throw std::invalid_argument("invalid config: initial state must be nonnegative");
  if (c.z0 > c.qb0) throw std::invalid_argument("invalid config: z0 must not exceed qb0");
}

struct PathEvent {
  double time;  ///< scaled time
  int type;     ///< 0..5 for bb, mbb, cbb, ba, mba, cba
  double size;  ///< raw size
  double qb, qa, z;  ///< post-event scaled state
};

struct QueuePath {
  double n = 1.0;
  double horizon = 0.0;
  double qb0 = 0.0, qa0 = 0.0, z0 = 0.0;
  std::vector<PathEvent> events;
  double tau_b = kInf, tau_a = kInf, tau_z = kInf, tau = kInf;
  double qb = 0.0, qa = 0.0, z = 0.0;  ///< final state
  std::uint64_t event_count = 0;
  std::uint64_t stop_event = 0;        ///< 1-based index of the stopping event, 0 if none
  std::uint64_t lemma_violations = 0;  ///< events with Z > Q^b before the stop
};

/// Event-driven simulation of the scaled triple (Q^b, Q^a, Z). Updates are
/// applied only while all three are positive; the event that takes one of them
/// to zero or below records the stop time and the overshooting state is kept.
inline QueuePath simulate_path(const SimConfig& cfg) {
  validate(cfg);
  QueuePath path;
  path.n = cfg.n;
  path.horizon = cfg.horizon;
  path.qb0 = cfg.qb0;
  path.qa0 = cfg.qa0;
  path.z0 = cfg.z0;
  double qb = cfg.qb0, qa = cfg.qa0, z = cfg.z0;
  bool active = qb > 0.0 && qa > 0.0 && z > 0.0;
  if (!active) {
    path.tau = 0.0;
    if (qb <= 0.0) path.tau_b = 0.0;
    if (qa <= 0.0) path.tau_a = 0.0;
    if (z <= 0.0) path.tau_z = 0.0;
  }
  ArrivalGenerator gen(cfg.arrival, Rng(cfg.seed, stream_id(StreamTag::arrivals, cfg.path_index)));
  MarkSampler marks(cfg.marks);
  Rng mark_rng(cfg.seed, stream_id(StreamTag::marks, cfg.path_index));
  const double n = cfg.n, raw_horizon = cfg.n * cfg.horizon;
  const bool uniform_cancel = cfg.cancellation.kind == CancellationRule::Kind::uniform;

  while (active || cfg.continue_after_stop) {
    QueueState st{qb, qa};
    const double s = gen.next(&st);
    if (s > raw_horizon) break;
    const double t = s / n;
    const auto [j, v] = marks(mark_rng);
    ++path.event_count;
    if (active) {
      if (z > qb) ++path.lemma_violations;
      const double d = v / n;
      switch (j) {
        case 0: qb += d; break;
        case 1:
          qb -= d;
          z -= d;
          break;
        case 2: {
          const double ratio = z / qb;
          qb -= d;
          z -= d * (uniform_cancel ? ratio : cfg.cancellation(ratio));
          break;
        }
        case 3: qa += d; break;
        default: qa -= d; break;
      }
      if (qb <= 0.0 || qa <= 0.0 || z <= 0.0) {
        active = false;
        path.tau = t;
        path.stop_event = path.event_count;
        if (qb <= 0.0) path.tau_b = t;
        if (qa <= 0.0) path.tau_a = t;
        if (z <= 0.0) path.tau_z = t;
      } else if (z > qb && uniform_cancel) {
        ++path.lemma_violations;
      }
    }
    if (cfg.record_events) path.events.push_back({t, j, v, qb, qa, z});
  }
  // the order sits inside the bid queue, so a bid depletion takes it along
  if (path.tau_z > path.tau_b) ++path.lemma_violations;
  path.qb = qb;
  path.qa = qa;
  path.z = z;
  return path;
}

inline QueuePath simulate_state_dependent(const SimConfig& cfg) {
  if (!std::holds_alternative<LinearStateDependent>(cfg.arrival))
    throw std::invalid_argument("simulate_state_dependent: arrival must be linear state-dependent");
  return simulate_path(cfg);
}

/// Piecewise-constant state lookup at scaled time t (post-event values).
struct StateAt {
  double qb, qa, z;
};

inline StateAt state_at(const QueuePath& p, double t) {
  auto it = std::upper_bound(p.events.begin(), p.events.end(), t,
                             [](double x, const PathEvent& e) { return x < e.time; });
  if (it == p.events.begin()) return {p.qb0, p.qa0, p.z0};
  --it;
  return {it->qb, it->qa, it->z};
}

/// Scaled net flow C_n and centred flow Psi_n built from every recorded event.
struct FlowPath {
  double n = 1.0;
  double lambda = 1.0;
  Vec6 vbar = Vec6::Zero();
  std::vector<double> times;
  std::vector<Vec6> cumulative;  ///< C_n right after each event

  Vec6 c_at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    if (it == times.begin()) return Vec6::Zero();
    return cumulative[std::size_t(it - times.begin()) - 1];
  }

  Vec6 psi_at(double t) const { return std::sqrt(n) * (c_at(t) - lambda * vbar * t); }
};

inline FlowPath extract_flows(const QueuePath& path, double lambda, const Vec6& vbar) {
  FlowPath f;
  f.n = path.n;
  f.lambda = lambda;
  f.vbar = vbar;
  f.times.reserve(path.events.size());
  f.cumulative.reserve(path.events.size());
  Vec6 raw = Vec6::Zero();
  for (const auto& e : path.events) {
    raw[e.type] += e.size;
    f.times.push_back(e.time);
    f.cumulative.push_back(raw / path.n);
  }
  return f;
}

inline void write_path_csv(std::ostream& os, const QueuePath& p) {
  os << "time,type,size,qb,qa,z\n";
  char buf[256];
  for (const auto& e : p.events) {
    std::snprintf(buf, sizeof buf, "%.17g,%d,%.17g,%.17g,%.17g,%.17g\n", e.time, e.type + 1, e.size, e.qb, e.qa, e.z);
    os << buf;
  }
}

inline void write_flows_csv(std::ostream& os, const FlowPath& f) {
  os << "time,c1,c2,c3,c4,c5,c6,psi1,psi2,psi3,psi4,psi5,psi6\n";
  char buf[64];
  for (std::size_t i = 0; i < f.times.size(); ++i) {
    const double t = f.times[i];
    const Vec6 psi = std::sqrt(f.n) * (f.cumulative[i] - f.lambda * f.vbar * t);
    std::snprintf(buf, sizeof buf, "%.17g", t);
    os << buf;
    for (int j = 0; j < 6; ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", f.cumulative[i][j]);
      os << buf;
    }
    for (int j = 0; j < 6; ++j) {
      std::snprintf(buf, sizeof buf, ",%.17g", psi[j]);
      os << buf;
    }
    os << '\n';
  }
}

/// Which stopping rule an embedded-chain run follows.
enum class ChainTarget {
  truncated,  ///< the usual dynamics, stopped at the first of the three crossings
  bid_only,   ///< Q^b alone, untruncated, until it is nonpositive
  ask_only,   ///< Q^a alone, untruncated, until it is nonpositive
};

struct ChainStop {
  std::uint64_t events = 0;  ///< number of events up to and including the stop, 0 if not reached
  bool bid = false, ask = false, position = false;
  bool lemma_ok = true;
};

/// Runs only the mark chain (no clock) until the target stop or `max_events`.
/// With Poisson arrivals independent of the marks, the stop time is then
/// Gamma(events, n lambda) in scaled time.
inline ChainStop run_mark_chain(const MarkSampler& marks, Rng& rng, double n, double qb, double qa, double z,
                                const CancellationRule& cancel, ChainTarget target, std::uint64_t max_events) {
  ChainStop out;
  const bool uniform_cancel = cancel.kind == CancellationRule::Kind::uniform;
  const double inv_n = 1.0 / n;
  for (std::uint64_t k = 1; k <= max_events; ++k) {
    const auto [j, v] = marks(rng);
    const double d = v * inv_n;
    if (target == ChainTarget::bid_only) {
      if (j == 0) qb += d;
      else if (j == 1 || j == 2) qb -= d;
      if (qb <= 0.0) {
        out.events = k;
        out.bid = true;
        return out;
      }
      continue;
    }
    if (target == ChainTarget::ask_only) {
      if (j == 3) qa += d;
      else if (j == 4 || j == 5) qa -= d;
      if (qa <= 0.0) {
        out.events = k;
        out.ask = true;
        return out;
      }
      continue;
    }
    if (z > qb) out.lemma_ok = false;
    switch (j) {
      case 0: qb += d; break;
      case 1:
        qb -= d;
        z -= d;
        break;
      case 2: {
        const double ratio = z / qb;
        qb -= d;
        z -= d * (uniform_cancel ? ratio : cancel(ratio));
        break;
      }
      case 3: qa += d; break;
      default: qa -= d; break;
    }
    if (qb <= 0.0 || qa <= 0.0 || z <= 0.0) {
      out.events = k;
      out.bid = qb <= 0.0;
      out.ask = qa <= 0.0;
      out.position = z <= 0.0;
      if (out.bid && !out.position) out.lemma_ok = false;
      return out;
    }
    if (z > qb) out.lemma_ok = false;
  }
  return out;
}

struct ChainState {
  double qb, qa, z;
  bool stopped = false;
};

/// Applies exactly `events` marks to the truncated dynamics (state frozen after a stop).
inline ChainState advance_mark_chain(const MarkSampler& marks, Rng& rng, double n, ChainState s,
                                     const CancellationRule& cancel, std::uint64_t events) {
  const bool uniform_cancel = cancel.kind == CancellationRule::Kind::uniform;
  const double inv_n = 1.0 / n;
  for (std::uint64_t k = 0; k < events && !s.stopped; ++k) {
    const auto [j, v] = marks(rng);
    const double d = v * inv_n;
    switch (j) {
      case 0: s.qb += d; break;
      case 1:
        s.qb -= d;
        s.z -= d;
        break;
      case 2: {
        const double ratio = s.z / s.qb;
        s.qb -= d;
        s.z -= d * (uniform_cancel ? ratio : cancel(ratio));
        break;
      }
      case 3: s.qa += d; break;
      default: s.qa -= d; break;
    }
    s.stopped = s.qb <= 0.0 || s.qa <= 0.0 || s.z <= 0.0;
  }
  return s;
}

}  // namespace lobqueue
