#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace skelfuse {

// Deterministic random helpers. std::uniform_real_distribution,
// std::uniform_int_distribution and std::shuffle are implementation-defined,
// so all draws are mapped by hand from the mt19937_64 stream. Results are
// therefore reproducible across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(engine_() >> 11) * kInv53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

  // Uniform integer in [0, n). Rejection sampling over a power-of-two mask.
  std::uint64_t below(std::uint64_t n) {
    if (n <= 1) return 0;
    std::uint64_t mask = n - 1;
    mask |= mask >> 1;
    mask |= mask >> 2;
    mask |= mask >> 4;
    mask |= mask >> 8;
    mask |= mask >> 16;
    mask |= mask >> 32;
    for (;;) {
      const std::uint64_t x = engine_() & mask;
      if (x < n) return x;
    }
  }

  // Fisher-Yates shuffle driven by below().
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::uint64_t raw() { return engine_(); }

 private:
  static constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
  std::mt19937_64 engine_;
};

// FNV-1a over raw bytes; the basis for all derived seeds and file hashes.
inline std::uint64_t fnv1a(std::string_view bytes,
                           std::uint64_t state = 1469598103934665603ull) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= 1099511628211ull;
  }
  return state;
}

inline std::uint64_t fnv1a_u64(std::uint64_t value, std::uint64_t state) {
  for (int i = 0; i < 8; ++i) {
    state ^= (value >> (8 * i)) & 0xffu;
    state *= 1099511628211ull;
  }
  return state;
}

// Seed derivation for independent jobs: hash of (master seed, tag, salt).
// Stable across platforms and scheduling order.
inline std::uint64_t mix_seed(std::uint64_t master, std::string_view tag,
                              std::uint64_t salt = 0) {
  std::uint64_t h = fnv1a_u64(master, 1469598103934665603ull);
  h = fnv1a(tag, h);
  h = fnv1a_u64(salt, h);
  // splitmix64 finalizer to spread low-entropy inputs
  h += 0x9e3779b97f4a7c15ull;
  h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
  h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
  return h ^ (h >> 31);
}

}  // namespace skelfuse
