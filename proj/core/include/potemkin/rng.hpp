#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace potemkin {

/// Deterministic 64-bit generator (splitmix64). All randomness in the toolkit
/// flows through this so that seeded runs are bit-reproducible across
/// platforms and standard-library versions.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [0, bound). bound must be >= 1.
  std::uint64_t below(std::uint64_t bound) { return next_u64() % bound; }

  bool bernoulli(double p) { return next_unit() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(v[i - 1], v[j]);
    }
  }

  /// Derives a child seed from a parent seed and a string tag. Used to hand
  /// each (model, concept) work unit its own stream so parallel execution
  /// cannot perturb results.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
    SplitMix64 g(seed ^ hash_string(tag));
    return g.next_u64();
  }

  /// FNV-1a over the bytes of s.
  static std::uint64_t hash_string(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  std::uint64_t state_;
};

}  // namespace potemkin
