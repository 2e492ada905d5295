#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace roughfut {

inline std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Deterministic child seed for a (seed, tag) pair.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) noexcept {
  std::uint64_t s = seed ^ (0xD1B54A32D192ED03ULL * (tag + 1));
  splitmix64(s);
  return splitmix64(s);
}

/// Stream tags. Every consumer of randomness draws from its own substream so
/// that changing one component never shifts another's draws.
enum class Stream : std::uint64_t {
  variance = 1,
  spot = 2,
  optimizer = 3,
  generator = 4,
  mesh_fine = 5,
  mesh_coarse = 6,
};

/// xoshiro256** keyed by (seed, stream, path). Satisfies UniformRandomBitGenerator.
class PathRng {
 public:
  using result_type = std::uint64_t;

  PathRng(std::uint64_t seed, Stream stream, std::uint64_t path) noexcept {
    std::uint64_t sm = seed;
    sm ^= splitmix64(sm) + static_cast<std::uint64_t>(stream) * 0xA24BAED4963EE407ULL;
    sm ^= splitmix64(sm) + path * 0x9FB21C651E98DF25ULL;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  double normal() { return gauss_(*this); }

  /// Uniform in (0,1).
  double uniform() noexcept { return ((*this)() >> 11) * 0x1.0p-53 + 0x1.0p-54; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::uint64_t s_[4]{};
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

}  // namespace roughfut
