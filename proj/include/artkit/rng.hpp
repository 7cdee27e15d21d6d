#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace artkit {

// Counter-based pseudo-random generator. State is a (key, counter) pair and
// every output is a pure integer hash of both, so identical seed + call
// sequence gives identical results regardless of platform word order.
// fork() derives an independent stream without advancing the parent.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0)
      : key_(mix(mix(seed + kGolden) ^ mix(stream + kGolden2))), counter_(0) {}

  uint64_t next_u64() { return mix(key_ + counter_++ * kGolden); }

  // Uniform in [0, 1): 53 mantissa bits.
  double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // lo..hi inclusive.
  int64_t uniform_int(int64_t lo, int64_t hi) {
    return lo + int64_t(next_u64() % uint64_t(hi - lo + 1));
  }

  // Box-Muller, cosine branch only; consumes two uniforms per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

  // Standard Gumbel(0, 1) sample.
  double gumbel() {
    double u = uniform();
    if (u < 1e-300) u = 1e-300;
    if (u > 1.0 - 1e-16) u = 1.0 - 1e-16;
    return -std::log(-std::log(u));
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream; the parent counter is untouched.
  Rng fork(uint64_t substream) const {
    Rng child(0);
    child.key_ = mix(key_ ^ mix(substream + kGolden2));
    child.counter_ = 0;
    return child;
  }

  Rng fork(std::string_view name) const { return fork(hash_name(name)); }

  static uint64_t hash_name(std::string_view s) {
    uint64_t h = 1469598103934665603ull;  // FNV-1a 64
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    return h;
  }

 private:
  static constexpr uint64_t kGolden = 0x9e3779b97f4a7c15ull;
  static constexpr uint64_t kGolden2 = 0xbf58476d1ce4e5b9ull;
  static constexpr double kPi = 3.14159265358979323846;

  // splitmix64 finalizer.
  static uint64_t mix(uint64_t x) {
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
  }

  uint64_t key_;
  uint64_t counter_;
};

}  // namespace artkit
