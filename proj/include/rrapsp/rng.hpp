#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace rrapsp {

/// splitmix64 finalizer; used to derive independent sub-stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of sub-stream `stream` for trial `trial` of a run seeded with `base`.
constexpr std::uint64_t deriveSeed(std::uint64_t base, std::uint64_t trial, std::uint64_t stream) {
  return mix64(mix64(base ^ mix64(trial)) + stream);
}

/// mt19937_64 with portable uniform/normal draws.
///
/// The standard distributions are implementation-defined, so draws are built
/// from raw 64-bit outputs (53-bit uniforms, Box-Muller normals) to keep
/// streams bitwise reproducible across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t bits() { return gen_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double normal() {
    if (hasSpare_) {
      hasSpare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    hasSpare_ = true;
    return radius * std::cos(angle);
  }

  /// ±1 with equal probability.
  int sign() { return (gen_() >> 63) != 0 ? 1 : -1; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

 private:
  std::mt19937_64 gen_;
  bool hasSpare_ = false;
  double spare_ = 0.0;
};

}  // namespace rrapsp
