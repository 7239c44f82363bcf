#include "doctest.h"

#include <cmath>
#include <numbers>

#include "raman/geometry.hpp"

using namespace raman;

namespace {
const OpticalConstants d1_line(795e-9, 6.8e9);
const CellGeometry cell(0.1, 2.16e-3, 1.76e-3, 13e-3);
} // namespace

TEST_CASE("spin wave vector at zero angle") {
  const auto K = spin_wave_vector(0.0, d1_line);
  CHECK(K[0] == 0.0);
  CHECK(K[1] == 0.0);
  // |K_z| = 2 pi / 44 mm for the 6.8 GHz shift
  CHECK(std::abs(K[2]) == doctest::Approx(2.0 * std::numbers::pi / 44e-3).epsilon(0.01));
  CHECK(K[2] < 0.0);
}

TEST_CASE("spin wave vector transverse component") {
  const auto K = spin_wave_vector(1e-3, d1_line);
  // k_s * theta with k_s ~ 2 pi / 795 nm
  CHECK(K[0] == doctest::Approx(7.90e3).epsilon(0.005));
}

TEST_CASE("non-paraxial angle rejected") {
  CHECK_THROWS_AS(spin_wave_vector(0.2, d1_line), std::domain_error);
  CHECK_THROWS_AS(angle_to_Kperp(0.0, -0.15, d1_line), std::domain_error);
}

TEST_CASE("angle to Kperp") {
  const auto zero = angle_to_Kperp(0.0, 0.0, d1_line);
  CHECK(zero[0] == 0.0);
  CHECK(zero[1] == 0.0);

  const auto K = angle_to_Kperp(1e-3, 0.0, d1_line);
  // paper rounds k_s to 2 pi / (0.8 mm mrad)
  CHECK(K[0] == doctest::Approx(2.0 * std::numbers::pi / 0.8e-3).epsilon(0.01));
  CHECK(K[1] == 0.0);
}

TEST_CASE("Kperp round trip") {
  const double tx = 2.7e-3, ty = -1.3e-3;
  const auto K = angle_to_Kperp(tx, ty, d1_line);
  const auto back = Kperp_to_angle(K[0], K[1], d1_line);
  CHECK(back[0] == doctest::Approx(tx).epsilon(1e-12));
  CHECK(back[1] == doctest::Approx(ty).epsilon(1e-12));
}

TEST_CASE("Fresnel number") {
  CHECK(fresnel_number(1.08e-3, d1_line, cell) == doctest::Approx(15.0).epsilon(0.03));
  // scales as w^2
  CHECK(fresnel_number(2.16e-3, d1_line, cell) == doctest::Approx(59.0).epsilon(0.03));
  CHECK(fresnel_number(1e-6, d1_line, cell) < 1e-4);
  CHECK_THROWS_AS(fresnel_number(0.0, d1_line, cell), std::domain_error);
}

TEST_CASE("fundamental mode spread") {
  const auto s = fundamental_mode_spread(d1_line, cell);
  CHECK(s.full_angular_spread == doctest::Approx(2.3e-3).epsilon(0.03));
  CHECK(s.delta_K / d1_line.k_stokes() == doctest::Approx(1.13e-3).epsilon(0.01));

  const CellGeometry long_cell(1e4, 2.16e-3, 1.76e-3, 0.0);
  CHECK(fundamental_mode_spread(d1_line, long_cell).delta_K < s.delta_K / 100.0);
}

TEST_CASE("spin wave vector mirror symmetry in theta") {
  for (double theta : {1e-4, 8e-4, 3e-3, 0.05}) {
    const auto Kp = spin_wave_vector(theta, d1_line);
    const auto Km = spin_wave_vector(-theta, d1_line);
    CHECK(Kp[0] == doctest::Approx(-Km[0]).epsilon(1e-12));
    CHECK(Kp[2] == doctest::Approx(Km[2]).epsilon(1e-12));
  }
}

TEST_CASE("transverse magnitude consistency") {
  // spin_wave_vector uses sin(theta), the small-angle map uses theta; they
  // agree up to the paraxial O(theta^2/6) correction
  for (double theta : {1e-4, 1e-3, 5e-3, 0.02}) {
    const auto K = spin_wave_vector(theta, d1_line);
    const auto Kp = angle_to_Kperp(theta, 0.0, d1_line);
    CHECK(std::abs(K[0]) == doctest::Approx(std::hypot(Kp[0], Kp[1])).epsilon(theta * theta / 6.0 + 1e-9));
  }
}

TEST_CASE("Fresnel number monotonicity") {
  double prev = 0.0;
  for (double w = 0.2e-3; w < 3e-3; w += 0.2e-3) {
    const double f = fresnel_number(w, d1_line, cell);
    CHECK(f > prev);
    prev = f;
  }
  const CellGeometry longer(0.2, 2.16e-3, 1.76e-3, 0.0);
  CHECK(fresnel_number(1e-3, d1_line, longer) < fresnel_number(1e-3, d1_line, cell));
}

TEST_CASE("optical constants invariants") {
  CHECK(d1_line.k_write() > 0.0);
  CHECK(d1_line.k_stokes() > 0.0);
  CHECK(d1_line.k_write() > d1_line.k_stokes());
}
