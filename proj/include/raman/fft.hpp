#pragma once

#include <complex>
#include <numbers>
#include <vector>

#include "raman/errors.hpp"

namespace raman {

// Iterative radix-2 complex FFT, in place. Length must be a power of two.
inline void fft_inplace(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw estimator_error("fft: length must be a power of two");

  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * std::numbers::pi / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse)
    for (auto& v : a) v /= static_cast<double>(n);
}

// 2D FFT of an nx x ny row-major array.
inline void fft2_inplace(std::vector<std::complex<double>>& a, int nx, int ny, bool inverse) {
  std::vector<std::complex<double>> line;
  line.resize(nx);
  for (int y = 0; y < ny; ++y) {
    std::copy(a.begin() + static_cast<std::ptrdiff_t>(y) * nx,
              a.begin() + static_cast<std::ptrdiff_t>(y + 1) * nx, line.begin());
    fft_inplace(line, inverse);
    std::copy(line.begin(), line.end(), a.begin() + static_cast<std::ptrdiff_t>(y) * nx);
  }
  line.resize(ny);
  for (int x = 0; x < nx; ++x) {
    for (int y = 0; y < ny; ++y) line[y] = a[static_cast<std::size_t>(y) * nx + x];
    fft_inplace(line, inverse);
    for (int y = 0; y < ny; ++y) a[static_cast<std::size_t>(y) * nx + x] = line[y];
  }
}

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

} // namespace raman
