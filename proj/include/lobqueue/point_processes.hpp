#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "rng.hpp"

namespace lobqueue {

/// Homogeneous Poisson arrivals at rate lambda.
struct Poisson {
  double lambda = 1.0;
};

/// Linear Hawkes process with kernel h(t) = a exp(-b t) and baseline nu.
struct HawkesExp {
  double nu = 1.0;
  double a = 0.0;
  double b = 1.0;
};

/// Cox process driven by exponential shot noise:
/// intensity nu + sum over shots s <= t of kappa exp(-delta (t - s)), shots Poisson(rho).
struct CoxShotNoise {
  double nu = 1.0;
  double rho = 0.0;
  double kappa = 0.0;
  double delta = 1.0;
};

/// Arrival intensity lambda + alpha Q^a + beta Q^b per unit of raw time,
/// Q^a and Q^b being the current scaled queue sizes.
struct LinearStateDependent {
  double lambda = 1.0;
  double alpha = 0.0;
  double beta = 0.0;
};

using ArrivalSpec = std::variant<Poisson, HawkesExp, CoxShotNoise, LinearStateDependent>;

inline std::string arrival_name(const ArrivalSpec& spec) {
  switch (spec.index()) {
    case 0: return "poisson";
    case 1: return "hawkes";
    case 2: return "cox";
    default: return "linear_state_dependent";
  }
}

inline void validate(const ArrivalSpec& spec) {
  auto bad = [](const std::string& m) { throw std::invalid_argument("invalid arrival parameters: " + m); };
  if (auto p = std::get_if<Poisson>(&spec)) {
    if (!(p->lambda > 0.0) || !std::isfinite(p->lambda)) bad("poisson rate must be positive and finite");
  } else if (auto h = std::get_if<HawkesExp>(&spec)) {
    if (!(h->nu > 0.0)) bad("hawkes baseline nu must be positive");
    if (!(h->b > 0.0)) bad("hawkes decay b must be positive");
    if (!(h->a >= 0.0)) bad("hawkes jump a must be nonnegative");
    if (!(h->a < h->b)) bad("hawkes process is not subcritical (kernel mass a/b must be < 1)");
  } else if (auto c = std::get_if<CoxShotNoise>(&spec)) {
    if (!(c->nu >= 0.0) || !(c->rho >= 0.0) || !(c->kappa >= 0.0)) bad("cox nu, rho, kappa must be nonnegative");
    if (!(c->delta > 0.0)) bad("cox decay delta must be positive");
    if (!(c->nu + c->rho * c->kappa / c->delta > 0.0)) bad("cox stationary rate must be positive");
  } else {
    const auto& l = std::get<LinearStateDependent>(spec);
    if (!(l.lambda > 0.0)) bad("state-dependent base rate must be positive");
    if (!(l.alpha >= 0.0) || !(l.beta >= 0.0)) bad("state-dependent coefficients must be nonnegative");
  }
}

/// Long-run arrival rate.
inline double stationary_rate(const ArrivalSpec& spec) {
  validate(spec);
  if (auto p = std::get_if<Poisson>(&spec)) return p->lambda;
  if (auto h = std::get_if<HawkesExp>(&spec)) return h->nu / (1.0 - h->a / h->b);
  if (auto c = std::get_if<CoxShotNoise>(&spec)) return c->nu + c->rho * c->kappa / c->delta;
  throw std::invalid_argument("stationary_rate: state-dependent arrivals have no stationary rate");
}

/// Kernel choice for the shot-noise part of the Cox variance.
enum class CoxVarianceForm {
  squared_mass,     ///< rho (int g)^2: matches the Var of the integrated intensity
  mass_of_square,   ///< rho int g^2
};

/// Asymptotic variance rate v_d^2 with Var N(0,t] ~ v_d^2 t.
inline double clt_variance(const ArrivalSpec& spec, CoxVarianceForm cox_form = CoxVarianceForm::squared_mass) {
  validate(spec);
  if (auto p = std::get_if<Poisson>(&spec)) return p->lambda;
  if (auto h = std::get_if<HawkesExp>(&spec)) {
    const double m = h->a / h->b;
    return h->nu / std::pow(1.0 - m, 3);
  }
  if (auto c = std::get_if<CoxShotNoise>(&spec)) {
    const double mass = c->kappa / c->delta;
    const double extra = cox_form == CoxVarianceForm::squared_mass ? mass * mass
                                                                    : c->kappa * c->kappa / (2.0 * c->delta);
    return c->nu + c->rho * mass + c->rho * extra;
  }
  throw std::invalid_argument("clt_variance: state-dependent arrivals have no stationary variance");
}

/// Current scaled queue sizes seen by state-dependent arrivals.
struct QueueState {
  double qb = 0.0;
  double qa = 0.0;
};

/// Produces successive raw-time arrival epochs. Hawkes and Cox generators are
/// started in the past with an empty history and run forward to time zero, so
/// the stream starts close to stationarity.
class ArrivalGenerator {
 public:
  ArrivalGenerator(const ArrivalSpec& spec, Rng rng) : spec_(spec), rng_(rng) {
    validate(spec_);
    if (auto h = std::get_if<HawkesExp>(&spec_)) {
      t_ = -20.0 / (h->b - h->a);
      burn_in();
    } else if (auto c = std::get_if<CoxShotNoise>(&spec_)) {
      t_ = -20.0 / c->delta;
      next_shot_ = c->rho > 0.0 ? t_ + rng_.exponential(c->rho) : std::numeric_limits<double>::infinity();
      burn_in();
    }
  }

  /// Next arrival epoch in raw time; `state` is needed for state-dependent arrivals only.
  double next(const QueueState* state = nullptr) {
    switch (spec_.index()) {
      case 0: t_ += rng_.exponential(std::get<Poisson>(spec_).lambda); return t_;
      case 1: return next_hawkes();
      case 2: return next_cox();
      default: {
        const auto& l = std::get<LinearStateDependent>(spec_);
        double rate = l.lambda;
        if (l.alpha != 0.0 || l.beta != 0.0) {
          if (!state) throw std::invalid_argument("state-dependent arrivals need the queue state");
          rate += l.alpha * std::max(state->qa, 0.0) + l.beta * std::max(state->qb, 0.0);
        }
        t_ += rng_.exponential(rate);
        return t_;
      }
    }
  }

  double time() const { return t_; }

 private:
  void burn_in() {
    // generate and discard epochs up to time zero; the excitation carries over
    for (;;) {
      const double save_t = t_;
      const double save_excite = excite_, save_shot = next_shot_;
      const Rng save_rng = rng_;
      const double e = spec_.index() == 1 ? next_hawkes() : next_cox();
      if (e > 0.0) {
        // rewind; the first call to next() replays this epoch
        t_ = save_t;
        excite_ = save_excite;
        next_shot_ = save_shot;
        rng_ = save_rng;
        return;
      }
    }
  }

  double next_hawkes() {
    const auto& h = std::get<HawkesExp>(spec_);
    for (;;) {
      const double bound = h.nu + excite_;
      const double w = rng_.exponential(bound);
      t_ += w;
      excite_ *= std::exp(-h.b * w);
      if (rng_.uniform() * bound <= h.nu + excite_) {
        excite_ += h.a;
        return t_;
      }
    }
  }

  double next_cox() {
    const auto& c = std::get<CoxShotNoise>(spec_);
    for (;;) {
      const double bound = c.nu + excite_;
      const double w = bound > 0.0 ? rng_.exponential(bound) : std::numeric_limits<double>::infinity();
      if (t_ + w >= next_shot_) {
        excite_ = excite_ * std::exp(-c.delta * (next_shot_ - t_)) + c.kappa;
        t_ = next_shot_;
        next_shot_ = t_ + rng_.exponential(c.rho);
        continue;
      }
      t_ += w;
      excite_ *= std::exp(-c.delta * w);
      if (rng_.uniform() * bound <= c.nu + excite_) return t_;
    }
  }

  ArrivalSpec spec_;
  Rng rng_;
  double t_ = 0.0;
  double excite_ = 0.0;
  double next_shot_ = std::numeric_limits<double>::infinity();
};

/// Arrival epochs in raw time on [0, horizon].
struct EventTimes {
  std::vector<double> times;
  double horizon = 0.0;

  std::size_t count_until(double t) const {
    return std::size_t(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  }
};

/// Simulates raw-time arrivals on [0, horizon]. For state-dependent arrivals a
/// reader for the current queue state must be supplied unless alpha = beta = 0.
inline EventTimes simulate_arrivals(const ArrivalSpec& spec, double horizon, std::uint64_t seed,
                                    std::uint64_t stream = 0,
                                    const std::function<QueueState()>& state_reader = {}) {
  validate(spec);
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("simulate_arrivals: horizon must be finite and nonnegative");
  ArrivalGenerator gen(spec, Rng(seed, stream_id(StreamTag::arrivals, stream)));
  EventTimes out;
  out.horizon = horizon;
  for (;;) {
    QueueState st;
    if (state_reader) st = state_reader();
    const double t = gen.next(state_reader ? &st : nullptr);
    if (t > horizon) break;
    out.times.push_back(t);
  }
  return out;
}

/// Raw epochs divided by the scaling parameter n.
inline std::vector<double> scaled_times(const EventTimes& ev, double n) {
  std::vector<double> out(ev.times.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ev.times[i] / n;
  return out;
}

inline void write_event_csv(std::ostream& os, const std::vector<double>& times) {
  os << "time\n";
  char buf[64];
  for (double t : times) {
    std::snprintf(buf, sizeof buf, "%.17g\n", t);
    os << buf;
  }
}

}  // namespace lobqueue
