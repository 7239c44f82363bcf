#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <thread>
#include <vector>

#include "raman/framestack.hpp"
#include "raman/geometry.hpp"
#include "raman/grid.hpp"
#include "raman/modes.hpp"
#include "raman/rng.hpp"

namespace raman {

struct DetectorModel {
  RealImage background_mean; // per-pixel counts; empty means zero
  double read_noise_sigma = 0.0;
  bool shot_noise = false;
  double counts_per_photon = 1.0;
};

struct ExperimentConfig {
  OpticalConstants optical{795e-9, 6.8e9};
  CellGeometry cell{0.1, 2.16e-3, 1.76e-3, 13e-3};
  double diffusion_D = 0.0;       // m^2/s
  double zeta_sq = 0.0;           // coherent scattering rate, 1/s
  double gamma_sp = 0.0;          // spontaneous emission rate, 1/s
  double t_write = 0.0;           // s
  double t_store = 0.0;           // s
  double t_read = 0.0;            // s
  double eta = 1.0;               // retrieval efficiency, [0,1]
  double epsilon = 0.0;           // read-stage Stokes leakage gain, [0,1]
  double read_blur = 0.26e-3;     // rad, read-beam wave-vector spread (1/e^2 radius)
  AngularGrid grid = AngularGrid::centered(128, 76e-6);
  DetectorModel detector;
  int n_modes = 1;
  int n_background = 100;
  std::uint64_t seed = 1;
  double w0 = 0.0;           // rad; 0 means derive from fundamental_mode_spread
  double gain_fresnel = 0.0; // 0 means compute from the write waist

  double fundamental_width() const {
    if (w0 > 0.0) return w0;
    return 0.5 * fundamental_mode_spread(optical, cell).full_angular_spread;
  }

  double effective_fresnel() const {
    if (gain_fresnel > 0.0) return gain_fresnel;
    return fresnel_number(0.5 * cell.write_waist_diameter, optical, cell);
  }

  ModeBasis make_basis() const {
    return build_mode_basis(grid, fundamental_width(), n_modes, effective_fresnel());
  }

  void validate() const {
    if (diffusion_D < 0.0 || zeta_sq < 0.0 || gamma_sp < 0.0) throw config_error("rates must be non-negative");
    if (t_write < 0.0 || t_store < 0.0 || t_read < 0.0) throw config_error("times must be non-negative");
    if (eta < 0.0 || eta > 1.0) throw config_error("eta must be in [0,1]");
    if (epsilon < 0.0 || epsilon > 1.0) throw config_error("epsilon must be in [0,1]");
    if (n_modes < 1) throw config_error("n_modes must be at least 1");
    if (detector.read_noise_sigma < 0.0) throw config_error("read noise sigma must be non-negative");
    for (double b : detector.background_mean.data)
      if (b < 0.0) throw config_error("background must be non-negative");
  }
};

// Complex transverse K-space amplitude of the stored excitation, sampled on
// the angular grid via K_perp = k_s * theta.
struct SpinWaveState {
  ComplexImage amplitude;
  double created_at = 0.0; // s, simulation-clock timestamp

  double energy() const {
    double e = 0.0;
    for (const auto& v : amplitude.data) e += std::norm(v);
    return e;
  }
};

struct ShotResult {
  RealImage stokes_frame;      // pre-detector intensity
  RealImage anti_stokes_frame; // pre-detector intensity
  SpinWaveState spin_wave;     // after the write pulse
  SpinWaveState spin_wave_decayed;
  std::vector<std::complex<double>> mode_amplitudes;
};

// Growth rate of mode m: kappa = zeta^2 g_m - D <|K_perp|^2>_m - gamma_sp.
inline double mode_growth_rate(int m, const ExperimentConfig& cfg, const ModeBasis& basis) {
  return cfg.zeta_sq * basis.gain_weights[m] - cfg.diffusion_D * mode_mean_Ksq(basis, m, cfg.optical) -
         cfg.gamma_sp;
}

// Mean thermal occupation after the write pulse: n = max(exp(kappa t) - 1, 0).
inline double mean_occupation(int m, const ExperimentConfig& cfg, const ModeBasis& basis) {
  const double kappa = mode_growth_rate(m, cfg, basis);
  const double n = std::expm1(kappa * cfg.t_write);
  return n > 0.0 ? n : 0.0;
}

namespace detail {

// Nearest pixel of the point reflection through the grid center; -1 if the
// mirror image falls outside the grid.
inline int mirror_index(int i, double c, int n) {
  const int j = static_cast<int>(std::lround(2.0 * c)) - i;
  return (j >= 0 && j < n) ? j : -1;
}

// In-place convolution of an intensity image with a normalized Gaussian
// kernel of 1/e^2 radius rho (separable, truncated at 2.5 rho).
inline void gaussian_blur(RealImage& img, const AngularGrid& grid, double rho) {
  if (rho < 0.5 * grid.pitch) return;
  const int half = std::max(1, static_cast<int>(std::ceil(2.5 * rho / grid.pitch)));
  std::vector<double> kernel(2 * half + 1);
  double ksum = 0.0;
  for (int k = -half; k <= half; ++k) {
    const double t = k * grid.pitch;
    kernel[k + half] = std::exp(-2.0 * t * t / (rho * rho));
    ksum += kernel[k + half];
  }
  for (auto& v : kernel) v /= ksum;

  RealImage tmp(img.nx, img.ny);
  for (int iy = 0; iy < img.ny; ++iy)
    for (int ix = 0; ix < img.nx; ++ix) {
      double s = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int jx = ix + k;
        if (jx >= 0 && jx < img.nx) s += kernel[k + half] * img.at(jx, iy);
      }
      tmp.at(ix, iy) = s;
    }
  for (int iy = 0; iy < img.ny; ++iy)
    for (int ix = 0; ix < img.nx; ++ix) {
      double s = 0.0;
      for (int k = -half; k <= half; ++k) {
        const int jy = iy + k;
        if (jy >= 0 && jy < img.ny) s += kernel[k + half] * tmp.at(ix, jy);
      }
      img.at(ix, iy) = s;
    }
}

} // namespace detail

// Draw one write-stage shot: thermal mode amplitudes, the Stokes speckle
// frame, and the phase-conjugate spin wave left in the ensemble.
inline ShotResult sample_stokes_shot(const ModeBasis& basis, const ExperimentConfig& cfg, RandomStream& rng) {
  if (!(basis.grid == cfg.grid)) throw config_error("sample_stokes_shot: basis grid differs from config grid");
  const int nm = basis.n_modes();
  ShotResult shot;
  shot.mode_amplitudes.resize(nm);
  for (int m = 0; m < nm; ++m) {
    const double n_mean = mean_occupation(m, cfg, basis);
    shot.mode_amplitudes[m] = n_mean > 0.0 ? rng.circular_gaussian(n_mean) : std::complex<double>{};
  }

  const AngularGrid& g = basis.grid;
  ComplexImage field(g.nx, g.ny);
  for (int m = 0; m < nm; ++m) {
    const std::complex<double> c = shot.mode_amplitudes[m];
    if (c == std::complex<double>{}) continue;
    const auto& u = basis.modes[m].data;
    for (std::size_t i = 0; i < field.data.size(); ++i) field.data[i] += c * u[i];
  }

  shot.stokes_frame = RealImage(g.nx, g.ny);
  shot.spin_wave.amplitude = ComplexImage(g.nx, g.ny);
  shot.spin_wave.created_at = cfg.t_write;
  for (std::size_t i = 0; i < field.data.size(); ++i) {
    shot.stokes_frame.data[i] = std::norm(field.data[i]);
    shot.spin_wave.amplitude.data[i] = std::conj(field.data[i]);
  }
  return shot;
}

// Diffusion damping: amplitude decays at D K^2 / 2 so the retrieved
// intensity decays at gamma = D K^2, matching the decay-fit convention.
inline SpinWaveState decay_spin_wave(const SpinWaveState& s, double t_store, const ExperimentConfig& cfg) {
  SpinWaveState out;
  out.amplitude = s.amplitude;
  out.created_at = s.created_at + t_store;
  if (t_store <= 0.0 || cfg.diffusion_D <= 0.0) return out;
  const AngularGrid& g = cfg.grid;
  const double ks = cfg.optical.k_stokes();
  const double Kz2 = cfg.optical.K_z() * cfg.optical.K_z();
  for (int iy = 0; iy < g.ny; ++iy) {
    const double ty = g.theta_y(iy);
    for (int ix = 0; ix < g.nx; ++ix) {
      const double tx = g.theta_x(ix);
      const double Kperp2 = ks * ks * (tx * tx + ty * ty);
      out.amplitude.at(ix, iy) *= std::exp(-0.5 * cfg.diffusion_D * (Kperp2 + Kz2) * t_store);
    }
  }
  return out;
}

// Read-stage retrieval: the stored wave maps to mirrored angles, blurred by
// the read-beam wave-vector spread. Optional epsilon adds read-induced
// Stokes leakage on the same side as the stored pattern.
inline RealImage retrieve_anti_stokes(const SpinWaveState& s, const ExperimentConfig& cfg, RandomStream& rng) {
  const AngularGrid& g = cfg.grid;
  RealImage img(g.nx, g.ny);
  for (int iy = 0; iy < g.ny; ++iy) {
    const int my = detail::mirror_index(iy, g.cy, g.ny);
    for (int ix = 0; ix < g.nx; ++ix) {
      const int mx = detail::mirror_index(ix, g.cx, g.nx);
      if (mx >= 0 && my >= 0) img.at(ix, iy) = cfg.eta * std::norm(s.amplitude.at(mx, my));
    }
  }
  if (cfg.epsilon > 0.0) {
    // Thermal leakage correlated with the stored wave, not mirrored.
    const double boost = std::norm(rng.circular_gaussian(1.0));
    for (int iy = 0; iy < g.ny; ++iy)
      for (int ix = 0; ix < g.nx; ++ix)
        img.at(ix, iy) += cfg.epsilon * boost * std::norm(s.amplitude.at(ix, iy));
  }
  detail::gaussian_blur(img, g, cfg.read_blur);
  return img;
}

// Detector: counts = gain * photons + background + read noise.
inline RealImage render_detected_frame(const RealImage& ideal, const DetectorModel& det, RandomStream& rng) {
  RealImage out(ideal.nx, ideal.ny);
  const bool has_bg = !det.background_mean.data.empty();
  for (std::size_t i = 0; i < ideal.data.size(); ++i) {
    double photons = ideal.data[i];
    if (det.shot_noise) photons = static_cast<double>(rng.poisson(photons));
    double counts = det.counts_per_photon * photons;
    if (has_bg) counts += det.background_mean.data[i];
    if (det.read_noise_sigma > 0.0) counts += det.read_noise_sigma * rng.gaussian();
    out.data[i] = counts;
  }
  return out;
}

struct SequenceResult {
  FrameStack stokes;
  FrameStack anti_stokes;
  FrameStack background;
};

namespace detail {

inline std::vector<float> to_float_frame(const RealImage& img) {
  std::vector<float> f(img.data.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = static_cast<float>(img.data[i]);
  return f;
}

} // namespace detail

// Full write -> store -> read sequence for n_frames shots plus background
// frames. Per-shot random streams are derived from (seed, shot index), so
// the output is identical for any thread count.
inline SequenceResult run_sequence(const ExperimentConfig& cfg, int n_frames, int n_threads = 1,
                                   const std::string& config_hash = "", const ModeBasis* shared_basis = nullptr) {
  if (n_frames < 1) throw config_error("run_sequence: need at least one frame");
  cfg.validate();
  std::optional<ModeBasis> basis_local;
  if (!shared_basis) basis_local.emplace(cfg.make_basis());
  const ModeBasis& basis = shared_basis ? *shared_basis : *basis_local;

  auto init_stack = [&](const std::string& label, int count) {
    FrameStack s;
    s.width = cfg.grid.nx;
    s.height = cfg.grid.ny;
    s.pitch_urad = cfg.grid.pitch * 1e6;
    s.cx = cfg.grid.cx;
    s.cy = cfg.grid.cy;
    s.label = label;
    s.config_hash = config_hash;
    s.seed = cfg.seed;
    if (label == "antistokes") s.region_center_x_mrad = cfg.cell.beam_tilt * 1e3;
    s.frames.resize(count);
    return s;
  };

  SequenceResult res;
  res.stokes = init_stack("stokes", n_frames);
  res.anti_stokes = init_stack("antistokes", n_frames);
  res.background = init_stack("background", cfg.n_background);

  auto run_shot = [&](int i) {
    RandomStream rng(cfg.seed, static_cast<std::uint64_t>(i));
    ShotResult shot = sample_stokes_shot(basis, cfg, rng);
    shot.spin_wave_decayed = decay_spin_wave(shot.spin_wave, cfg.t_store, cfg);
    shot.anti_stokes_frame = retrieve_anti_stokes(shot.spin_wave_decayed, cfg, rng);
    res.stokes.frames[i] = detail::to_float_frame(render_detected_frame(shot.stokes_frame, cfg.detector, rng));
    res.anti_stokes.frames[i] =
        detail::to_float_frame(render_detected_frame(shot.anti_stokes_frame, cfg.detector, rng));
  };
  auto run_background = [&](int i) {
    RandomStream rng(cfg.seed, static_cast<std::uint64_t>(n_frames + i));
    const RealImage dark(cfg.grid.nx, cfg.grid.ny);
    res.background.frames[i] = detail::to_float_frame(render_detected_frame(dark, cfg.detector, rng));
  };

  const int total = n_frames + cfg.n_background;
  auto run_index = [&](int i) {
    if (i < n_frames)
      run_shot(i);
    else
      run_background(i - n_frames);
  };

  n_threads = std::max(1, n_threads);
  if (n_threads == 1) {
    for (int i = 0; i < total; ++i) run_index(i);
  } else {
    std::vector<std::thread> workers;
    workers.reserve(n_threads);
    for (int t = 0; t < n_threads; ++t)
      workers.emplace_back([&, t] {
        for (int i = t; i < total; i += n_threads) run_index(i);
      });
    for (auto& w : workers) w.join();
  }
  return res;
}

} // namespace raman
