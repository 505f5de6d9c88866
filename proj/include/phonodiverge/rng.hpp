#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace phonodiverge {

/// Name of the standard-normal generator, echoed in run configs so a corpus
/// can be regenerated bit-for-bit elsewhere.
inline constexpr std::string_view kNormalGenerator = "mt19937_64/box-muller";

uint64_t splitmix64(uint64_t x);

/// FNV-1a over the bytes of `s`, then mixed with `seed`.
uint64_t stable_hash(std::string_view s, uint64_t seed);

/// Seeded engine with portable uniform and normal draws. std::*_distribution
/// output is implementation-defined, so the transforms live here.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(splitmix64(seed)) {}

  uint64_t next_u64() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  /// Uniform integer in [0, bound) by rejection; bound > 0.
  uint64_t below(uint64_t bound);
  double normal();

  template <typename It>
  void shuffle(It first, It last) {
    auto n = static_cast<uint64_t>(last - first);
    for (uint64_t i = n; i > 1; --i) {
      uint64_t j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace phonodiverge
