// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <stdexcept>

namespace vidistill {

/// Deterministic counter-free random stream built on splitmix64.
///
/// Streams are cheap value types whose whole state is one 64-bit word, so any
/// point of the pipeline can derive an independent stream from a structural
/// key (seed, purpose, epoch, batch, ...) instead of threading one global
/// engine around. That makes sampling reproducible under resume and under
/// parallel workers: the draw for a given (epoch, batch, slot) never depends
/// on what other workers did.
class SeedStream {
public:
  explicit SeedStream(uint64_t seed) : state_(seed) {}

  /// Derive a stream by mixing the parts of a structural key.
  static SeedStream from_key(std::initializer_list<uint64_t> key) {
    uint64_t h = 0x9e3779b97f4a7c15ull;
    for (uint64_t k : key) {
      h ^= mix(k + h);
      h = mix(h);
    }
    return SeedStream(h);
  }

  uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    return mix(state_);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi], inclusive. Bitmask rejection keeps the
  /// distribution exact and the stream platform-independent.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    if (lo > hi) throw std::invalid_argument("SeedStream: empty integer range");
    uint64_t range = static_cast<uint64_t>(hi - lo);
    if (range == 0) return lo;
    uint64_t mask = ~0ull >> countl_zero(range);
    uint64_t r;
    do {
      r = next_u64() & mask;
    } while (r > range);
    return lo + static_cast<int64_t>(r);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Standard normal via Box-Muller. Both uniforms are always consumed and
  /// the second value is discarded, so the stream carries no hidden state.
  double normal() {
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
  static uint64_t mix(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static int countl_zero(uint64_t x) {
    int n = 0;
    if (x == 0) return 64;
    while (!(x & 0x8000000000000000ull)) {
      x <<= 1;
      ++n;
    }
    return n;
  }

  uint64_t state_;
};

/// Stable 64-bit content hash (FNV-1a); used to derive deterministic
/// pseudo-noise from tensor contents.
inline uint64_t fnv1a64(const void* bytes, size_t n) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  uint64_t h = 0xcbf29ce484222325ull;
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace vidistill
