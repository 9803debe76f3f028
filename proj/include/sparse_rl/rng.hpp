#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <span>

namespace sparse_rl {

// Counter-based pseudo-random stream (splitmix64 core).
//
// A stream is fully determined by its key words, so any cell of a seeded
// experiment (e.g. keyed by master seed, grid point, replicate) can be
// reproduced in isolation without replaying the sweep. Sampling helpers use
// only integer arithmetic and IEEE doubles, so results are identical across
// platforms.
class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : state_(derive(0x243f6a8885a308d3ULL, key)) {}

  static RngStream keyed(std::initializer_list<std::uint64_t> words) {
    std::uint64_t h = 0x243f6a8885a308d3ULL;
    for (std::uint64_t w : words) h = derive(h, w);
    RngStream s(0);
    s.state_ = h;
    s.counter_ = 0;
    return s;
  }

  std::uint64_t next_u64() {
    counter_ += 0x9e3779b97f4a7c15ULL;
    return finalize(state_ + counter_);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double next_range(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Uniform integer in [0, n). n must be positive.
  int next_below(int n) {
#ifdef __SIZEOF_INT128__
    __extension__ typedef unsigned __int128 uint128;
    return static_cast<int>((static_cast<uint128>(next_u64()) * static_cast<uint128>(n)) >> 64);
#else
    return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n));
#endif
  }

  // +1 or -1 with equal probability.
  int next_sign() { return (next_u64() >> 63) ? 1 : -1; }

  // Index sampled from an (unnormalized is fine) nonnegative weight vector.
  int sample_weights(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = next_unit() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  // Index sampled from a probability vector (rows already sum to one).
  int sample_distribution(std::span<const double> probs) { return sample_weights(probs); }

  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    // Box-Muller on uniforms bounded away from zero.
    double u1 = next_unit();
    while (u1 <= 0x1.0p-60) u1 = next_unit();
    double u2 = next_unit();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  static std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  static std::uint64_t derive(std::uint64_t h, std::uint64_t w) {
    return finalize(h + 0x9e3779b97f4a7c15ULL + w * 0xff51afd7ed558ccdULL);
  }

  std::uint64_t state_ = 0;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// FNV-1a, used for config hashes in run manifests.
inline std::uint64_t fnv1a64(std::span<const char> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace sparse_rl
