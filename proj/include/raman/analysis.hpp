#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "raman/fft.hpp"
#include "raman/fitting.hpp"
#include "raman/framestack.hpp"
#include "raman/grid.hpp"

namespace raman {

struct RadialProfile {
  std::vector<double> theta;     // bin centers, rad
  std::vector<double> mean;      // mean intensity per bin
  std::vector<double> std_error; // per-bin standard error
  std::vector<int> counts;
  double bin_width = 0.0; // rad
};

struct CorrelationMap {
  RealImage values; // C in [-1, 1]
  int ref_x = 0;    // px, in stack_j coordinates
  int ref_y = 0;
  std::string kind; // "ss" | "as"
  AngularGrid grid;
};

inline FrameStack subtract_background(const FrameStack& stack, const FrameStack& bg) {
  if (stack.width != bg.width || stack.height != bg.height)
    throw estimator_error("subtract_background: dimension mismatch");
  if (bg.n_frames() == 0) throw estimator_error("subtract_background: empty background stack");

  std::vector<double> bg_mean(stack.frame_size(), 0.0);
  for (const auto& f : bg.frames)
    for (std::size_t i = 0; i < bg_mean.size(); ++i) bg_mean[i] += f[i];
  for (auto& v : bg_mean) v /= bg.n_frames();

  FrameStack out = stack;
  // Negative residuals kept: clipping would bias the fluctuation statistics.
  for (auto& f : out.frames)
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(f[i] - bg_mean[i]);
  return out;
}

inline RealImage mean_image(const FrameStack& stack) {
  if (stack.n_frames() == 0) throw estimator_error("mean_image: empty stack");
  RealImage out(stack.width, stack.height);
  for (const auto& f : stack.frames)
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] += f[i];
  for (auto& v : out.data) v /= stack.n_frames();
  return out;
}

// Azimuthal average around the grid center; bin width one pixel pitch,
// bins with fewer than 8 samples dropped.
inline RadialProfile polar_average(const RealImage& image, const AngularGrid& grid) {
  const double max_r = std::hypot(std::max(grid.cx, grid.nx - 1 - grid.cx),
                                  std::max(grid.cy, grid.ny - 1 - grid.cy)) * grid.pitch;
  const int n_bins = static_cast<int>(max_r / grid.pitch) + 2;
  std::vector<double> sum(n_bins, 0.0), sum2(n_bins, 0.0);
  std::vector<int> count(n_bins, 0);
  for (int iy = 0; iy < grid.ny; ++iy)
    for (int ix = 0; ix < grid.nx; ++ix) {
      const double r = grid.theta_r(ix, iy);
      int b = static_cast<int>(r / grid.pitch);
      if (b >= n_bins) b = n_bins - 1;
      const double v = image.at(ix, iy);
      sum[b] += v;
      sum2[b] += v * v;
      ++count[b];
    }

  RadialProfile prof;
  prof.bin_width = grid.pitch;
  for (int b = 0; b < n_bins; ++b) {
    if (count[b] < 8) continue;
    const double m = sum[b] / count[b];
    const double var = std::max(sum2[b] / count[b] - m * m, 0.0);
    prof.theta.push_back((b + 0.5) * grid.pitch);
    prof.mean.push_back(m);
    prof.std_error.push_back(std::sqrt(var / count[b]));
    prof.counts.push_back(count[b]);
  }
  return prof;
}

// Linear interpolation of a radial profile at angle theta.
inline double profile_value_at(const RadialProfile& prof, double theta) {
  const auto& t = prof.theta;
  if (t.empty()) throw estimator_error("profile_value_at: empty profile");
  if (theta <= t.front()) return prof.mean.front();
  if (theta >= t.back()) return prof.mean.back();
  const auto it = std::upper_bound(t.begin(), t.end(), theta);
  const std::size_t i = static_cast<std::size_t>(it - t.begin());
  const double f = (theta - t[i - 1]) / (t[i] - t[i - 1]);
  return prof.mean[i - 1] * (1.0 - f) + prof.mean[i] * f;
}

// Pearson correlation across frames between every pixel of stack_i and the
// reference pixel of stack_j (Eq.-2-style normalized fluctuation estimator).
inline CorrelationMap correlation_map(const FrameStack& stack_i, const FrameStack& stack_j, int ref_x,
                                      int ref_y, const std::string& kind = "ss") {
  if (stack_i.n_frames() != stack_j.n_frames())
    throw estimator_error("correlation_map: frame counts differ");
  const int nf = stack_i.n_frames();
  if (nf < 100) throw estimator_error("correlation_map: need at least 100 frames");
  if (ref_x < 0 || ref_x >= stack_j.width || ref_y < 0 || ref_y >= stack_j.height)
    throw estimator_error("correlation_map: reference pixel outside grid");

  const std::size_t npx = stack_i.frame_size();
  const std::size_t ref = static_cast<std::size_t>(ref_y) * stack_j.width + ref_x;
  const bool same = (&stack_i == &stack_j) ||
                    (stack_i.label == stack_j.label && stack_i.seed == stack_j.seed &&
                     stack_i.config_hash == stack_j.config_hash && !stack_i.config_hash.empty());

  std::vector<double> b(nf);
  double b_mean = 0.0;
  for (int f = 0; f < nf; ++f) {
    b[f] = stack_j.frames[f][ref];
    b_mean += b[f];
  }
  b_mean /= nf;
  double sbb = 0.0;
  for (int f = 0; f < nf; ++f) {
    b[f] -= b_mean;
    sbb += b[f] * b[f];
  }
  if (sbb <= 0.0) throw estimator_error("correlation_map: zero-variance (dead) reference pixel");

  std::vector<double> a_mean(npx, 0.0);
  for (int f = 0; f < nf; ++f)
    for (std::size_t p = 0; p < npx; ++p) a_mean[p] += stack_i.frames[f][p];
  for (auto& v : a_mean) v /= nf;

  std::vector<double> sab(npx, 0.0), saa(npx, 0.0);
  for (int f = 0; f < nf; ++f) {
    const auto& frame = stack_i.frames[f];
    const double bf = b[f];
    for (std::size_t p = 0; p < npx; ++p) {
      const double da = frame[p] - a_mean[p];
      sab[p] += da * bf;
      saa[p] += da * da;
    }
  }

  CorrelationMap map;
  map.values = RealImage(stack_i.width, stack_i.height);
  map.ref_x = ref_x;
  map.ref_y = ref_y;
  map.kind = kind;
  map.grid = stack_i.grid();
  for (std::size_t p = 0; p < npx; ++p) {
    double c = 0.0;
    if (saa[p] > 0.0) c = sab[p] / std::sqrt(saa[p] * sbb);
    map.values.data[p] = std::clamp(c, -1.0, 1.0);
  }
  if (same) map.values.data[ref] = 1.0; // self-correlation is 1 by definition
  return map;
}

struct PeakFit {
  double theta_x = 0.0; // rad, fitted peak center
  double theta_y = 0.0;
  int peak_px = 0; // pixel of the raw maximum
  int peak_py = 0;
  double width = 0.0; // rad, 1/e^2 radius
  double sigma_width = 0.0;
  double peak_value = 0.0;
  bool converged = false;
};

namespace detail {

// 2D Gaussian fit around the maximum of an image; window spans 4x the
// initial FWHM estimate from second moments above half max. Optionally
// masks one pixel (the zero-lag spike of autocorrelations).
inline PeakFit fit_peak(const RealImage& img, const AngularGrid& grid, int mask_x = -1, int mask_y = -1) {
  int px = 0, py = 0;
  double vmax = -1e300;
  for (int iy = 0; iy < img.ny; ++iy)
    for (int ix = 0; ix < img.nx; ++ix) {
      if (ix == mask_x && iy == mask_y) continue;
      if (img.at(ix, iy) > vmax) {
        vmax = img.at(ix, iy);
        px = ix;
        py = iy;
      }
    }

  const double half = 0.5 * vmax;
  int above = 0;
  double m0 = 0.0, mx = 0.0, my = 0.0, mr2 = 0.0;
  for (int iy = 0; iy < img.ny; ++iy)
    for (int ix = 0; ix < img.nx; ++ix) {
      if (ix == mask_x && iy == mask_y) continue;
      const double v = img.at(ix, iy);
      if (v < half) continue;
      ++above;
      m0 += v;
      mx += v * ix;
      my += v * iy;
    }
  if (above < 3 || m0 <= 0.0) throw estimator_error("fit_peak: peak not resolvable (fewer than 3 pixels above half max)");
  mx /= m0;
  my /= m0;
  for (int iy = 0; iy < img.ny; ++iy)
    for (int ix = 0; ix < img.nx; ++ix) {
      if (ix == mask_x && iy == mask_y) continue;
      const double v = img.at(ix, iy);
      if (v < half) continue;
      mr2 += v * ((ix - mx) * (ix - mx) + (iy - my) * (iy - my));
    }
  mr2 /= m0;
  // For the part of A exp(-2 r^2/w^2) above half max, <r^2> ~ 0.23 w^2.
  double w_px = std::sqrt(std::max(mr2, 0.25) / 0.23);
  w_px = std::max(w_px, 1.0);
  const double fwhm_px = w_px * std::sqrt(std::log(2.0) / 2.0) * 2.0;
  const int win = std::max(3, static_cast<int>(std::ceil(2.0 * fwhm_px)));

  std::vector<double> xs, ys, zs, mask;
  for (int iy = std::max(0, py - win); iy <= std::min(img.ny - 1, py + win); ++iy)
    for (int ix = std::max(0, px - win); ix <= std::min(img.nx - 1, px + win); ++ix) {
      xs.push_back(ix);
      ys.push_back(iy);
      zs.push_back(img.at(ix, iy));
      mask.push_back(ix == mask_x && iy == mask_y ? 0.0 : 1.0);
    }

  Gaussian2DFit fit = fit_gaussian_2d(xs, ys, zs, mask, vmax, mx, my, w_px, 0.0);

  PeakFit out;
  out.peak_px = px;
  out.peak_py = py;
  out.theta_x = (fit.x0 - grid.cx) * grid.pitch;
  out.theta_y = (fit.y0 - grid.cy) * grid.pitch;
  out.width = fit.width * grid.pitch;
  out.sigma_width = fit.sigma_width * grid.pitch;
  out.peak_value = vmax;
  out.converged = fit.converged;
  return out;
}

} // namespace detail

// 1/e^2 radius of the dominant peak of a correlation map.
inline PeakFit correlation_peak(const CorrelationMap& map, bool mask_reference = false) {
  return detail::fit_peak(map.values, map.grid, mask_reference ? map.ref_x : -1,
                          mask_reference ? map.ref_y : -1);
}

inline double correlation_width(const CorrelationMap& map) { return correlation_peak(map).width; }

// Mean frame-wise autocorrelation of the intensity fluctuations, peak
// centered at zero lag. Computed by FFT on a power-of-two padded grid.
inline RealImage fluctuation_autocorrelation(const FrameStack& stack) {
  if (stack.n_frames() == 0) throw estimator_error("fluctuation_autocorrelation: empty stack");
  const RealImage mean = mean_image(stack);
  const int px = next_pow2(stack.width);
  const int py = next_pow2(stack.height);

  std::vector<std::complex<double>> buf(static_cast<std::size_t>(px) * py);
  std::vector<double> acc(buf.size(), 0.0);
  for (const auto& frame : stack.frames) {
    std::fill(buf.begin(), buf.end(), std::complex<double>{});
    for (int y = 0; y < stack.height; ++y)
      for (int x = 0; x < stack.width; ++x)
        buf[static_cast<std::size_t>(y) * px + x] =
            frame[static_cast<std::size_t>(y) * stack.width + x] - mean.at(x, y);
    fft2_inplace(buf, px, py, false);
    for (std::size_t i = 0; i < buf.size(); ++i) acc[i] += std::norm(buf[i]);
  }
  for (auto& v : acc) v /= stack.n_frames();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = acc[i];
  fft2_inplace(buf, px, py, true);

  // fftshift so lag (0,0) sits at (px/2, py/2)
  RealImage out(px, py);
  for (int y = 0; y < py; ++y)
    for (int x = 0; x < px; ++x)
      out.at(x, y) = buf[static_cast<std::size_t>((y + py / 2) % py) * px + (x + px / 2) % px].real();
  return out;
}

// Mean speckle-grain 1/e^2 radius of a stack. The autocorrelation peak is a
// speckle self-convolution, sqrt(2) wider than the grain itself; the zero-lag
// detector-noise spike is excluded from the fit.
inline double speckle_width(const FrameStack& stack) {
  const RealImage ac = fluctuation_autocorrelation(stack);
  const AngularGrid acgrid(ac.nx, ac.ny, stack.pitch(), ac.nx / 2, ac.ny / 2);
  const PeakFit peak = detail::fit_peak(ac, acgrid, ac.nx / 2, ac.ny / 2);
  return peak.width / std::sqrt(2.0);
}

// 1/e^2 radius of the autocorrelation peak itself (before deconvolution).
inline double autocorrelation_width(const FrameStack& stack) {
  const RealImage ac = fluctuation_autocorrelation(stack);
  const AngularGrid acgrid(ac.nx, ac.ny, stack.pitch(), ac.nx / 2, ac.ny / 2);
  return detail::fit_peak(ac, acgrid, ac.nx / 2, ac.ny / 2).width;
}

// N = 2 (w_avg / w_C)^2.
inline double mode_count(double w_avg, double w_C) {
  if (!(w_avg > 0.0) || !(w_C > 0.0)) throw estimator_error("mode_count: widths must be positive");
  return 2.0 * (w_avg / w_C) * (w_avg / w_C);
}

} // namespace raman
