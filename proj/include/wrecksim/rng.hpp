#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace wrecksim {

/// SplitMix64 finalizer. Stable across platforms; used to derive
/// independent seeds from (master seed, index) pairs.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ mix64(value));
}

/// FNV-1a over bytes; used for tags and content fingerprints.
constexpr std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derive a named sub-stream seed, e.g. derive_seed(sample_seed, "field").
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return hash_combine(seed, fnv1a(tag));
}

/// Seeded generator with platform-independent distributions.
///
/// std::mt19937_64 output is fixed by the standard, but the standard
/// distributions are not, so all sampling goes through the helpers here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi]; returns lo when lo == hi.
  double uniform(double lo, double hi) { return lo == hi ? lo : lo + (hi - lo) * uniform(); }

  /// Uniform integer in [lo, hi] by rejection (unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(engine_());
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
  }

  /// Rayleigh-distributed sample with scale sigma.
  double rayleigh(double sigma);

 private:
  std::mt19937_64 engine_;
};

}  // namespace wrecksim
