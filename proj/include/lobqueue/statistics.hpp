#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

namespace lobqueue {

/// Pairwise summation; error grows like log(n) instead of n.
inline double pairwise_sum(std::span<const double> x) {
  if (x.size() <= 64) {
    double s = 0.0;
    for (double v : x) s += v;
    return s;
  }
  const std::size_t half = x.size() / 2;
  return pairwise_sum(x.first(half)) + pairwise_sum(x.subspan(half));
}

inline double mean(std::span<const double> x) {
  if (x.empty()) throw std::invalid_argument("mean: empty sample");
  return pairwise_sum(x) / double(x.size());
}

/// Unbiased sample variance, two-pass.
inline double variance(std::span<const double> x) {
  if (x.size() < 2) throw std::invalid_argument("variance: need at least two values");
  const double m = mean(x);
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = (x[i] - m) * (x[i] - m);
  return pairwise_sum(d) / double(x.size() - 1);
}

inline double covariance(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("covariance: size mismatch");
  const double mx = mean(x), my = mean(y);
  std::vector<double> d(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) d[i] = (x[i] - mx) * (y[i] - my);
  return pairwise_sum(d) / double(x.size() - 1);
}

/// Standard error of the mean from contiguous batch means.
inline double batch_standard_error(std::span<const double> x, std::size_t batches = 50) {
  batches = std::min(batches, x.size());
  if (batches < 2) throw std::invalid_argument("batch_standard_error: too few values");
  std::vector<double> bm(batches);
  const std::size_t per = x.size() / batches;
  for (std::size_t b = 0; b < batches; ++b) bm[b] = mean(x.subspan(b * per, per));
  return std::sqrt(variance(bm) / double(batches));
}

/// Statistic computed on each batch; returns the spread-based standard error
/// of the full-sample statistic (batch sd / sqrt(batches)).
template <class Stat>
double batched_statistic_se(std::size_t count, std::size_t batches, Stat&& stat) {
  if (batches < 2 || count < batches) throw std::invalid_argument("batched_statistic_se: bad batching");
  std::vector<double> vals(batches);
  const std::size_t per = count / batches;
  for (std::size_t b = 0; b < batches; ++b) vals[b] = stat(b * per, per);
  return std::sqrt(variance(vals) / double(batches));
}

/// Kolmogorov distribution survival function Q(l) = P(K > l).
inline double kolmogorov_sf(double l) {
  if (l <= 0.0) return 1.0;
  if (l < 0.2) return 1.0;
  double s = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double term = std::exp(-2.0 * k * k * l * l);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// One-sample KS test against a continuous CDF; asymptotic p-value.
template <class Cdf>
KsResult ks_test(std::vector<double> sample, Cdf&& cdf) {
  if (sample.empty()) throw std::invalid_argument("ks_test: empty sample");
  std::sort(sample.begin(), sample.end());
  const double n = double(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, double(i + 1) / n - f, f - double(i) / n});
  }
  return {d, kolmogorov_sf(std::sqrt(n) * d), sample.size()};
}

/// Two-sample KS statistic.
inline KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = double(a.size()), nb = double(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::fabs(double(i) / na - double(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  return {d, kolmogorov_sf(std::sqrt(ne) * d), a.size() + b.size()};
}

inline unsigned default_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1u : hc;
}

/// Runs fn(i) for i in [0, count) on a pool of threads. Work is pulled from a
/// shared counter; callers store results by index so the outcome does not
/// depend on scheduling.
inline void parallel_for(std::size_t count, unsigned workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = std::min<std::size_t>(workers, count);
  for (unsigned w = 0; w < n; ++w) pool.emplace_back(body);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace lobqueue
