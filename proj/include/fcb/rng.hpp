#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

#include "fcb/common.hpp"

namespace fcb {

// Seeded random source with labeled stream splitting.
//
// Reproducibility contract (kept deliberately explicit so datasets and
// Monte-Carlo runs are identical across platforms):
//   * engine: std::mt19937_64, whose output sequence is fixed by the C++
//     standard for a given seed;
//   * uniform01: top 53 bits of the next engine word mapped to [0,1) as
//     (w >> 11) * 2^-53 — no std::uniform_real_distribution, whose mapping
//     is implementation-defined;
//   * normal: Box-Muller on two such uniforms (u1 shifted into (0,1]), with
//     the paired variate cached — again avoiding the unspecified algorithm
//     behind std::normal_distribution;
//   * split(label): child seed = splitmix64(parent_root ^ fnv1a64(label)),
//     giving independent, order-insensitive streams addressed by name.
class RandomSource {
 public:
  explicit RandomSource(std::uint64_t seed) : root_(seed), eng_(seed) {}

  RandomSource split(std::string_view label) const {
    return RandomSource(splitmix64(root_ ^ fnv1a64(label)));
  }

  std::uint64_t next_u64() { return eng_(); }

  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    require(lo <= hi, "RandomSource::uniform: empty interval");
    return lo + (hi - lo) * uniform01();
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 1.0 - uniform01();  // (0, 1]: keeps the log finite
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  static std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

  static std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::uint64_t root_;
  std::mt19937_64 eng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace fcb
