#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace raman {

// splitmix64 step (Vigna 2015): used both as the per-stream generator and to
// derive independent per-shot streams from (seed, stream index).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Counter-based splittable stream: results depend only on (seed, stream id),
// never on scheduling, so parallel shot generation stays reproducible.
class RandomStream {
public:
  RandomStream(std::uint64_t seed, std::uint64_t stream_id) {
    // Mix seed and stream id through two rounds so nearby ids decorrelate.
    std::uint64_t s = seed;
    const std::uint64_t a = splitmix64(s);
    s = a ^ (stream_id * 0xda942042e4dd58b5ULL);
    (void)splitmix64(s);
    state_ = splitmix64(s);
  }

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in (0, 1).
  double uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double gaussian() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * std::numbers::pi * u2;
    cached_ = r * std::sin(phi);
    have_cached_ = true;
    return r * std::cos(phi);
  }

  // Circular complex Gaussian with <|c|^2> = mean_sq_modulus.
  std::complex<double> circular_gaussian(double mean_sq_modulus) {
    const double s = std::sqrt(0.5 * mean_sq_modulus);
    return {s * gaussian(), s * gaussian()};
  }

  long long poisson(double mean) {
    if (mean <= 0.0) return 0;
    if (mean < 30.0) {
      // Knuth multiplication method.
      const double limit = std::exp(-mean);
      double p = 1.0;
      long long k = -1;
      do {
        ++k;
        p *= uniform();
      } while (p > limit);
      return k;
    }
    // Normal approximation with continuity correction for large means.
    const double x = mean + std::sqrt(mean) * gaussian() + 0.5;
    return x > 0.0 ? static_cast<long long>(x) : 0;
  }

private:
  std::uint64_t state_ = 0;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

} // namespace raman
