#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace polarflow {

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Child seed for stream `index` of a parent seed. Used for per-draw and
/// per-trajectory streams so results do not depend on scheduling.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix64(mix64(seed) ^ mix64(index + 0x632BE59BD9B4E019ULL));
}

/// Counter-based generator: output k is the k-th value of the splitmix64
/// sequence started at `seed`, i.e. mix64(seed + (k + 1) * golden). Any
/// element of the stream can be computed without the ones before it.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit constexpr CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

  constexpr std::uint64_t at(std::uint64_t counter) const noexcept {
    return mix64(seed_ + (counter + 1) * kGolden);
  }

  constexpr std::uint64_t next() noexcept { return at(counter_++); }

  /// Uniform in (0, 1], 53 bits.
  double uniform_open0() noexcept {
    return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
  }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Standard normal draws by Box-Muller over a CounterRng. Each pair of
/// uniforms yields two normals; the second is cached.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) noexcept : rng_(seed) {}

  double operator()() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = rng_.uniform_open0();
    const double u2 = rng_.uniform_open0();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

 private:
  CounterRng rng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace polarflow
