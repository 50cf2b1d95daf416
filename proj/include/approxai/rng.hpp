#pragma once
// Seeded, splittable random streams. Every random draw in the library and
// CLI comes from a Stream derived from one root seed plus a stream name, so
// results never depend on a global generator or on the standard library's
// distribution implementations.

#include <cstdint>
#include <string_view>

namespace approxai {

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view bytes,
                                std::uint64_t hash = 0xCBF29CE484222325ull) noexcept {
  for (const char c : bytes) {
    hash ^= static_cast<unsigned char>(c);
    hash *= 0x100000001B3ull;
  }
  return hash;
}

/// xoshiro256** generator.
class Stream {
 public:
  explicit constexpr Stream(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  /// Child stream keyed by a name, independent of how many draws the parent
  /// has made.
  [[nodiscard]] constexpr Stream split(std::string_view name) const noexcept {
    return Stream(fnv1a64(name, seed_material()));
  }
  [[nodiscard]] constexpr Stream split(std::uint64_t index) const noexcept {
    std::uint64_t sm = seed_material() ^ (index * 0xD1B54A32D192ED03ull);
    return Stream(splitmix64(sm));
  }

  constexpr std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1p-53; }
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound));
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  [[nodiscard]] constexpr std::uint64_t seed_material() const noexcept {
    return state_[0] ^ rotl(state_[1], 13) ^ rotl(state_[2], 29) ^ rotl(state_[3], 47);
  }

  std::uint64_t state_[4]{};
};

}  // namespace approxai
