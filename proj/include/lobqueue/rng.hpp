#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace lobqueue {

/// Philox4x32-10 block function. Counter of four 32-bit words, key of two.
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                                 std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += W0;
      key[1] += W1;
    }
    const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
    const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
    const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

/// Tags used to derive independent streams from one master seed.
enum class StreamTag : std::uint32_t {
  arrivals = 1,
  marks = 2,
  burn_in = 3,
  shots = 4,
  diffusion = 5,
  aux = 6,
  example1 = 7,
};

/// Stream id from a tag and an index (path number, worker slot, ...).
constexpr std::uint64_t stream_id(StreamTag tag, std::uint64_t index) {
  return (std::uint64_t(tag) << 48) ^ index;
}

/// Counter-based stream. The key is the master seed; the upper two counter
/// words hold the stream id and the lower two a block index, so streams never
/// overlap and draws do not depend on how work is split across threads.
class Rng {
 public:
  using result_type = std::uint32_t;

  Rng(std::uint64_t seed, std::uint64_t stream)
      : key_{std::uint32_t(seed), std::uint32_t(seed >> 32)},
        stream_{std::uint32_t(stream), std::uint32_t(stream >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = (*this)();
    return (hi << 32) | (*this)();
  }

  /// Uniform on the open interval (0,1) with 53 random bits.
  double uniform() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  /// Cheap uniform on (0,1) with 32 random bits, used for category selection.
  double uniform32() { return (double((*this)()) + 0.5) * 0x1.0p-32; }

  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double phi = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(phi);
    has_spare_ = true;
    return r * std::cos(phi);
  }

  /// Gamma(shape, rate) by Marsaglia-Tsang, with the usual boost for shape < 1.
  double gamma(double shape, double rate = 1.0) {
    if (!(shape > 0.0) || !(rate > 0.0)) throw std::invalid_argument("gamma: shape and rate must be positive");
    if (shape < 1.0) {
      const double g = gamma(shape + 1.0, 1.0);
      return g * std::pow(uniform(), 1.0 / shape) / rate;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
    }
  }

  /// Poisson count by the product method; large means are split into chunks.
  std::uint64_t poisson(double mean) {
    if (!(mean >= 0.0)) throw std::invalid_argument("poisson: mean must be nonnegative");
    std::uint64_t k = 0;
    double remaining = mean;
    while (remaining > 30.0) {
      k += poisson_small(30.0);
      remaining -= 30.0;
    }
    return k + poisson_small(remaining);
  }

 private:
  std::uint64_t poisson_small(double mean) {
    const double limit = std::exp(-mean);
    double prod = uniform();
    std::uint64_t k = 0;
    while (prod > limit) {
      prod *= uniform();
      ++k;
    }
    return k;
  }

  void refill() {
    buf_ = philox4x32_10({std::uint32_t(block_), std::uint32_t(block_ >> 32), stream_[0], stream_[1]}, key_);
    ++block_;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 2> stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace lobqueue
