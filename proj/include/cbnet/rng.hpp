#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace cbnet {

// Reproducible simulation RNG. The generator is std::mt19937_64 seeded with
// std::seed_seq over the 32-bit words of (seed, replica); both the engine and
// seed_seq are fully specified by the standard, so streams are identical
// across platforms and runs. Sampling never goes through std::distributions
// (those are implementation-defined): uniforms take the top 53 bits, and
// exponentials use the inverse CDF -ln(1-u)/rate.
class SimRng {
 public:
  explicit SimRng(std::uint64_t seed, std::uint64_t replica = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replica), static_cast<std::uint32_t>(replica >> 32)};
    engine_.seed(seq);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log1p(-uniform()) / rate; }

  // Index sampled proportionally to `weights` (sum given as `total`).
  std::size_t categorical(std::span<const double> weights, double total) {
    const double target = uniform() * total;
    double acc = 0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (target < acc) return i;
    }
    return weights.empty() ? 0 : weights.size() - 1;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cbnet
