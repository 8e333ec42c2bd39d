#pragma once

#include <cstdint>
#include <random>

namespace rtp {

// Independent stream per (master seed, stream index); the same pair always
// reproduces the same sequence, whatever thread consumes it.
class RngStream {
 public:
  RngStream(std::uint64_t masterSeed, std::uint64_t streamIndex) {
    std::seed_seq seq{static_cast<std::uint32_t>(masterSeed), static_cast<std::uint32_t>(masterSeed >> 32),
                      static_cast<std::uint32_t>(streamIndex),
                      static_cast<std::uint32_t>(streamIndex >> 32), 0x72747031u};
    engine_.seed(seq);
  }

  // Uniform on [0, 1).
  double uniform() { return std::generate_canonical<double, 53>(engine_); }
  double exponential(double rate) { return std::exponential_distribution<double>(rate)(engine_); }
  double normal() { return std::normal_distribution<double>()(engine_); }
  double gammaVariate(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }
  double beta(double a, double b) {
    const double x = gammaVariate(a);
    const double y = gammaVariate(b);
    return x / (x + y);
  }
  std::uint64_t binomial(std::uint64_t n, double p) {
    if (n == 0 || p <= 0.0) return 0;
    if (p >= 1.0) return n;
    return std::binomial_distribution<std::uint64_t>(n, p)(engine_);
  }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace rtp
