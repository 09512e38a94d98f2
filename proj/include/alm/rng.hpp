#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace alm {

// Sub-stream domains. Each (seed, domain, index) triple seeds an independent
// engine, so a path's draws never depend on which worker produced it.
enum class StreamDomain : std::uint32_t {
  market = 1,
  inflation = 2,
  mortality = 3,
  portfolio = 4,
};

/// Random stream owned by one path: uniform draws from a 64-bit Mersenne
/// twister, turned into standard normals with the basic Box-Muller transform.
/// Both outputs of each transform are consumed.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, StreamDomain domain, std::uint64_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed),
                      static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(domain),
                      static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    engine_.seed(seq);
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1], safe for log().
  double uniform_open_zero() { return 1.0 - uniform(); }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open_zero();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace alm
