#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace gcnkit {

/**
 * @brief Seeded generator used for weight init, dropout masks and splits.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard. Distribution objects from <random> are implementation-defined, so
 * uniform variates are derived from the raw 64-bit output here instead.
 * Independent streams (init vs dropout) come from mixing the user seed with a
 * stream tag through splitmix64.
 */
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  Rng(std::uint64_t seed, std::string_view stream) : engine_(splitmix64(seed ^ tag(stream))) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n) by rejection, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = (~std::uint64_t{0} / n) * n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  static std::uint64_t tag(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  std::mt19937_64 engine_;
};

}  // namespace gcnkit
