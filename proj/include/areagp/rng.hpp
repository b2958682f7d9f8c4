#pragma once

#include <cmath>
#include <cstdint>

namespace areagp {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based random stream keyed by (seed, iteration, unit, block).
// Every sampler block draws from its own stream, so results do not depend
// on how work is scheduled across threads. All arithmetic is explicit
// (Box-Muller, Marsaglia-Tsang), keeping output identical across platforms.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t iteration, std::uint64_t unit,
             std::uint64_t block) {
    state_ = seed;
    mix(0x53a5f2a8c1e9d4b7ULL ^ iteration);
    mix(0x9c8f2d1b5a3e7c64ULL ^ unit);
    mix(0x2b7e151628aed2a6ULL ^ block);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform on (0, 1); never returns 0 or 1 exactly.
  double uniform() {
    const std::uint64_t bits = next_u64() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
  double gamma(double shape) {
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
    }
  }

 private:
  void mix(std::uint64_t k) {
    state_ ^= splitmix64(k);
    splitmix64(state_);
  }

  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Block tags used to key CounterRng streams inside the sampler and tools.
namespace rng_block {
constexpr std::uint64_t sigma = 1;
constexpr std::uint64_t phi = 2;
constexpr std::uint64_t nu = 3;
constexpr std::uint64_t beta = 4;
constexpr std::uint64_t z = 5;
constexpr std::uint64_t car = 6;
constexpr std::uint64_t forecast = 7;
constexpr std::uint64_t simulate = 8;
constexpr std::uint64_t insample = 9;
}  // namespace rng_block

}  // namespace areagp
