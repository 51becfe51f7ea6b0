#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace fpsrm {

/// Stateless counter-based generator: every draw is a pure function of
/// (seed, stream, counter), so particle loops can be split arbitrarily
/// without changing the sequence any particle sees.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t bits(std::uint64_t stream, std::uint64_t counter) const {
    return mix(mix(seed_ ^ mix(stream + 0x632be59bd9b4e019ULL)) + counter);
  }

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t counter) const {
    return (static_cast<double>(bits(stream, counter) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Pair of independent standard normals (Box-Muller) consuming counters
  /// 2c and 2c+1.
  std::pair<double, double> normal_pair(std::uint64_t stream, std::uint64_t c) const {
    const double u1 = uniform(stream, 2 * c);
    const double u2 = uniform(stream, 2 * c + 1);
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

 private:
  // SplitMix64 finalizer.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace fpsrm
