#pragma once

#include <cmath>
#include <complex>
#include <cstdlib>
#include <vector>

#include "raman/errors.hpp"
#include "raman/geometry.hpp"
#include "raman/grid.hpp"

namespace raman {

struct ModeIndex {
  int p = 0; // radial number
  int l = 0; // azimuthal number
  int order() const { return 2 * p + std::abs(l); }
};

// Ordered transverse mode basis sampled on the far-field angular grid.
// Modes are Laguerre-Gaussian profiles ordered by combined order q = 2p + |l|,
// L2-normalized on the grid, each carrying a gain weight g in (0, 1].
struct ModeBasis {
  AngularGrid grid;
  double w0 = 0.0; // rad, 1/e^2 intensity radius of the fundamental
  std::vector<ModeIndex> indices;
  std::vector<ComplexImage> modes;
  std::vector<double> gain_weights;

  int n_modes() const { return static_cast<int>(modes.size()); }
};

namespace detail {

// Associated Laguerre polynomial L_p^a(x) by the three-term recurrence.
inline double assoc_laguerre(int p, int a, double x) {
  if (p == 0) return 1.0;
  double lm1 = 1.0;
  double l = 1.0 + a - x;
  for (int k = 2; k <= p; ++k) {
    const double next = ((2.0 * k - 1.0 + a - x) * l - (k - 1.0 + a) * lm1) / k;
    lm1 = l;
    l = next;
  }
  return l;
}

inline std::vector<ModeIndex> enumerate_lg_indices(int n_modes) {
  std::vector<ModeIndex> out;
  out.reserve(n_modes);
  for (int q = 0; static_cast<int>(out.size()) < n_modes; ++q) {
    // all (p, l) with 2p + |l| = q, ascending |l|, negative l first
    for (int absl = q % 2; absl <= q && static_cast<int>(out.size()) < n_modes; absl += 2) {
      const int p = (q - absl) / 2;
      if (absl == 0) {
        out.push_back({p, 0});
      } else {
        out.push_back({p, -absl});
        if (static_cast<int>(out.size()) < n_modes) out.push_back({p, absl});
      }
    }
  }
  return out;
}

} // namespace detail

// Gain schedule: g = F / (F + q). Populates about F orders before tapering.
inline double gain_weight(int combined_order, double fresnel) {
  return fresnel / (fresnel + combined_order);
}

inline ModeBasis build_mode_basis(const AngularGrid& grid, double w0, int n_modes, double gain_fresnel) {
  if (n_modes < 1) throw config_error("build_mode_basis: need at least one mode");
  if (w0 < 2.0 * grid.pitch)
    throw config_error("build_mode_basis: fundamental width unresolvable on this grid");
  if (gain_fresnel <= 0.0) throw config_error("build_mode_basis: Fresnel parameter must be positive");

  ModeBasis basis;
  basis.grid = grid;
  basis.w0 = w0;
  basis.indices = detail::enumerate_lg_indices(n_modes);

  // Highest mode must still fit: its 1/e^2 radius grows like w0 sqrt(q+1).
  const int q_max = basis.indices.back().order();
  if (w0 * std::sqrt(static_cast<double>(q_max + 1)) > grid.half_extent())
    throw config_error("build_mode_basis: highest-order mode exceeds the grid");

  basis.modes.reserve(n_modes);
  basis.gain_weights.reserve(n_modes);
  const double inv_w0 = 1.0 / w0;
  for (const ModeIndex& mi : basis.indices) {
    ComplexImage u(grid.nx, grid.ny);
    const int a = std::abs(mi.l);
    for (int iy = 0; iy < grid.ny; ++iy) {
      const double ty = grid.theta_y(iy);
      for (int ix = 0; ix < grid.nx; ++ix) {
        const double tx = grid.theta_x(ix);
        const double r2 = (tx * tx + ty * ty) * inv_w0 * inv_w0;
        const double radial = std::pow(std::sqrt(2.0 * r2), a) *
                              detail::assoc_laguerre(mi.p, a, 2.0 * r2) * std::exp(-r2);
        const double phi = std::atan2(ty, tx);
        u.at(ix, iy) = std::polar(radial, mi.l * phi);
      }
    }
    // L2-normalize on the grid.
    double norm2 = 0.0;
    for (const auto& v : u.data) norm2 += std::norm(v);
    if (norm2 <= 0.0) throw config_error("build_mode_basis: degenerate mode profile");
    const double inv_norm = 1.0 / std::sqrt(norm2);
    for (auto& v : u.data) v *= inv_norm;

    basis.modes.push_back(std::move(u));
    basis.gain_weights.push_back(gain_weight(mi.order(), gain_fresnel));
  }
  return basis;
}

struct KSpectrum {
  std::vector<double> K;    // bin centers, rad/m
  std::vector<double> prob; // normalized to sum 1
  double mean_Ksq = 0.0;    // <|K_perp|^2>, rad^2/m^2
};

// Radial |K_perp| distribution of one mode's grid-sampled |amplitude|^2.
inline KSpectrum mode_K_spectrum(const ModeBasis& basis, int m, const OpticalConstants& oc) {
  if (m < 0 || m >= basis.n_modes()) throw std::out_of_range("mode_K_spectrum: mode index out of range");
  const ComplexImage& u = basis.modes[m];
  const AngularGrid& g = basis.grid;
  const double ks = oc.k_stokes();
  const double dK = ks * g.pitch;

  const double K_max = ks * std::hypot(std::max(g.cx, g.nx - 1 - g.cx) * g.pitch,
                                       std::max(g.cy, g.ny - 1 - g.cy) * g.pitch);
  const int n_bins = static_cast<int>(K_max / dK) + 2;

  KSpectrum s;
  s.K.resize(n_bins);
  s.prob.assign(n_bins, 0.0);
  for (int b = 0; b < n_bins; ++b) s.K[b] = (b + 0.5) * dK;

  double total = 0.0;
  double ksq_sum = 0.0;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const double w = std::norm(u.at(ix, iy));
      const double Kperp = ks * g.theta_r(ix, iy);
      int b = static_cast<int>(Kperp / dK);
      if (b >= n_bins) b = n_bins - 1;
      s.prob[b] += w;
      total += w;
      ksq_sum += w * Kperp * Kperp;
    }
  }
  for (auto& p : s.prob) p /= total;
  s.mean_Ksq = ksq_sum / total;
  return s;
}

// <|K_perp|^2> of mode m, directly from the 2D grid samples.
inline double mode_mean_Ksq(const ModeBasis& basis, int m, const OpticalConstants& oc) {
  if (m < 0 || m >= basis.n_modes()) throw std::out_of_range("mode_mean_Ksq: mode index out of range");
  const ComplexImage& u = basis.modes[m];
  const AngularGrid& g = basis.grid;
  const double ks = oc.k_stokes();
  double total = 0.0, ksq = 0.0;
  for (int iy = 0; iy < g.ny; ++iy) {
    for (int ix = 0; ix < g.nx; ++ix) {
      const double w = std::norm(u.at(ix, iy));
      const double t = g.theta_r(ix, iy);
      total += w;
      ksq += w * ks * ks * t * t;
    }
  }
  return ksq / total;
}

} // namespace raman
