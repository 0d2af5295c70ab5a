#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

namespace probekit {

/// 64-bit FNV-1a. Stable across platforms; used for split assignment,
/// fingerprints and per-cell seeds.
std::uint64_t fnv1a64(std::string_view bytes,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

std::uint64_t splitmix64(std::uint64_t x);

/// Combines a base seed with any number of discriminators into a new seed.
std::uint64_t derive_seed(std::uint64_t base,
                          std::initializer_list<std::uint64_t> parts);

std::uint64_t hash_with_seed(std::string_view key, std::uint64_t seed);

std::string to_hex(std::uint64_t value);

/// Small deterministic generator. Unlike the <random> distributions its
/// output is specified bit-for-bit, so reruns on other standard libraries
/// reproduce the same weights and shuffles.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);

  bool coin() { return (next() >> 63) != 0; }

  template <typename It>
  void shuffle(It first, It last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace probekit
