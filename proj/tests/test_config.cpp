#include "doctest.h"

#include <string>

#include "raman/config.hpp"

using namespace raman;

namespace {

// Paper-default document used as a baseline for the parser tests.
const std::string valid = R"({
  "optical": {"lambda_write_nm": 795.0, "stokes_shift_ghz": 6.8},
  "cell": {"length_mm": 100.0, "write_waist_mm": 2.16, "read_waist_mm": 1.76, "tilt_mrad": 13.0},
  "gas": {"name": "Kr-1torr", "diffusion_cm2_s": 146.0},
  "rates": {"zeta_sq_per_s": 9.0e6, "gamma_sp_per_s": 1.0e6},
  "pulses": {"t_write_us": 0.5, "t_store_us": 0.0, "t_read_us": 2.0},
  "sim": {"n_modes": 36, "grid_n": 128, "pitch_urad": 76.0, "seed": 1,
          "n_frames": 500, "n_background": 100, "w0_mrad": 1.4},
  "detector": {"background_mean": 2.0, "read_noise_sigma": 1.0,
               "shot_noise": true, "counts_per_photon": 1.0},
  "retrieval": {"eta": 0.8, "epsilon": 0.0}
})";

std::string patched(const std::string& from, const std::string& to) {
  std::string s = valid;
  const auto pos = s.find(from);
  REQUIRE(pos != std::string::npos);
  s.replace(pos, from.size(), to);
  return s;
}

} // namespace

TEST_CASE("valid config parses with correct units") {
  const ConfigDocument c = parse_config(valid);
  CHECK(c.lambda_write_nm == 795.0);
  CHECK(c.gas_name == "Kr-1torr");
  CHECK(c.read_blur_mrad == 0.26); // default applies

  const ExperimentConfig cfg = c.to_experiment();
  CHECK(cfg.optical.lambda_write == doctest::Approx(795e-9));
  CHECK(cfg.cell.length == doctest::Approx(0.1));
  CHECK(cfg.diffusion_D == doctest::Approx(146e-4));
  CHECK(cfg.t_write == doctest::Approx(0.5e-6));
  CHECK(cfg.grid.pitch == doctest::Approx(76e-6));
  CHECK(cfg.grid.nx == 128);
  CHECK(cfg.w0 == doctest::Approx(1.4e-3));
  CHECK(cfg.eta == 0.8);
  CHECK(cfg.detector.shot_noise);
  CHECK(cfg.read_blur == doctest::Approx(0.26e-3));
  CHECK_FALSE(c.config_hash.empty());
}

TEST_CASE("config hash is stable and content-sensitive") {
  const ConfigDocument a = parse_config(valid);
  const ConfigDocument b = parse_config(valid);
  CHECK(a.config_hash == b.config_hash);
  const ConfigDocument c = parse_config(patched("\"seed\": 1", "\"seed\": 2"));
  CHECK(a.config_hash != c.config_hash);
}

TEST_CASE("unknown keys and sections are rejected by name") {
  try {
    parse_config(patched("\"eta\": 0.8", "\"eta\": 0.8, \"bogus\": 1"));
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("retrieval.bogus") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config(valid.substr(0, valid.size() - 2) + ", \"extra\": {}}"), config_error);
}

TEST_CASE("missing keys are rejected by name") {
  try {
    parse_config(patched("\"name\": \"Kr-1torr\", ", ""));
    FAIL("expected config_error");
  } catch (const config_error& e) {
    CHECK(std::string(e.what()).find("gas.name") != std::string::npos);
  }
}

TEST_CASE("type errors are rejected") {
  CHECK_THROWS_AS(parse_config(patched("\"grid_n\": 128", "\"grid_n\": \"big\"")), config_error);
  CHECK_THROWS_AS(parse_config("not json at all"), config_error);
  CHECK_THROWS_AS(parse_config("[1,2,3]"), config_error);
}

TEST_CASE("physical invariants are enforced") {
  CHECK_THROWS_AS(parse_config(patched("\"eta\": 0.8", "\"eta\": 1.2")).to_experiment(), config_error);
  CHECK_THROWS_AS(parse_config(patched("\"epsilon\": 0.0", "\"epsilon\": -0.1")).to_experiment(), config_error);
  CHECK_THROWS_AS(parse_config(patched("\"length_mm\": 100.0", "\"length_mm\": -5")).to_experiment(), config_error);
  CHECK_THROWS_AS(parse_config(patched("\"grid_n\": 128", "\"grid_n\": 8")).to_experiment(), config_error);
}
