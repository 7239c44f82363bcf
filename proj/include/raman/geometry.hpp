#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "raman/errors.hpp"

namespace raman {

inline constexpr double speed_of_light = 299792458.0; // m/s

// Paraxial validity bound for scattering angles.
inline constexpr double paraxial_limit = 0.1; // rad

// Wavelength of the write laser and the Raman (Stokes) frequency shift fix
// both optical wavenumbers. The anti-Stokes and read wavenumbers are taken
// equal in magnitude to the Stokes and write ones respectively; the hyperfine
// shift is negligible against the optical frequency.
struct OpticalConstants {
  double lambda_write; // m
  double stokes_shift; // Hz

  OpticalConstants(double lambda_write_m, double stokes_shift_hz)
      : lambda_write(lambda_write_m), stokes_shift(stokes_shift_hz) {
    if (lambda_write <= 0.0) throw config_error("OpticalConstants: wavelength must be positive");
    if (k_stokes() <= 0.0) throw config_error("OpticalConstants: Stokes shift too large for wavelength");
  }

  double k_write() const { return 2.0 * std::numbers::pi / lambda_write; }
  double k_stokes() const { return k_write() - 2.0 * std::numbers::pi * stokes_shift / speed_of_light; }

  // Longitudinal spin-wave component, common to all stored waves.
  double K_z() const { return k_stokes() - k_write(); }
};

struct CellGeometry {
  double length;               // m
  double write_waist_diameter; // m, 1/e^2 full width
  double read_waist_diameter;  // m
  double beam_tilt;            // rad

  CellGeometry(double length_m, double write_waist_m, double read_waist_m, double tilt_rad)
      : length(length_m), write_waist_diameter(write_waist_m), read_waist_diameter(read_waist_m),
        beam_tilt(tilt_rad) {
    if (length <= 0.0 || write_waist_diameter <= 0.0 || read_waist_diameter <= 0.0)
      throw config_error("CellGeometry: lengths must be positive");
    if (beam_tilt < 0.0) throw config_error("CellGeometry: tilt must be non-negative");
  }
};

inline void check_paraxial(double theta) {
  if (std::abs(theta) >= paraxial_limit)
    throw std::domain_error("angle exceeds paraxial limit of 0.1 rad");
}

// Wave vector of the spin wave stored when a Stokes photon scatters at angle
// theta in the x-z plane: K = k_w - k_s.
inline std::array<double, 3> spin_wave_vector(double theta, const OpticalConstants& oc) {
  check_paraxial(theta);
  const double ks = oc.k_stokes();
  return {ks * std::sin(theta), 0.0, ks * std::cos(theta) - oc.k_write()};
}

inline std::array<double, 2> angle_to_Kperp(double theta_x, double theta_y, const OpticalConstants& oc) {
  check_paraxial(theta_x);
  check_paraxial(theta_y);
  const double ks = oc.k_stokes();
  return {ks * theta_x, ks * theta_y};
}

inline std::array<double, 2> Kperp_to_angle(double Kx, double Ky, const OpticalConstants& oc) {
  const double ks = oc.k_stokes();
  return {Kx / ks, Ky / ks};
}

// F = k_s w^2 / (2 pi L), with w the beam waist radius.
inline double fresnel_number(double waist_radius, const OpticalConstants& oc, const CellGeometry& cg) {
  if (waist_radius <= 0.0) throw std::domain_error("fresnel_number: waist radius must be positive");
  return oc.k_stokes() * waist_radius * waist_radius / (2.0 * std::numbers::pi * cg.length);
}

struct ModeSpread {
  double delta_K;            // rad/m
  double full_angular_spread; // rad, = 2 delta_K / k_s
};

// Wave-vector width of the fundamental spin-wave mode, dK = sqrt(k_s / L).
inline ModeSpread fundamental_mode_spread(const OpticalConstants& oc, const CellGeometry& cg) {
  const double dK = std::sqrt(oc.k_stokes() / cg.length);
  return {dK, 2.0 * dK / oc.k_stokes()};
}

} // namespace raman
