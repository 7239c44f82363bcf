#include "doctest.h"

#include <cmath>
#include <complex>

#include "raman/fitting.hpp"
#include "raman/simulate.hpp"
#include "test_helpers.hpp"

using namespace raman;
using raman::testing::small_config;

TEST_CASE("mean occupation vanishes without pump or write time") {
  ExperimentConfig cfg = small_config();
  const ModeBasis basis = cfg.make_basis();

  ExperimentConfig no_write = cfg;
  no_write.t_write = 0.0;
  for (int m = 0; m < basis.n_modes(); ++m) CHECK(mean_occupation(m, no_write, basis) == 0.0);

  ExperimentConfig no_pump = cfg;
  no_pump.zeta_sq = 0.0;
  for (int m = 0; m < basis.n_modes(); ++m) CHECK(mean_occupation(m, no_pump, basis) == 0.0);
}

TEST_CASE("mean occupation matches the closed form") {
  // kappa = zeta^2 - D<K^2> - gamma_sp with the D term forced to 0.5e6/s:
  // kappa t = (3e6 - 0.5e6 - 1e6) * 2us = 3, so n = e^3 - 1
  ExperimentConfig cfg = small_config();
  cfg.n_modes = 1;
  cfg.zeta_sq = 3.0e6;
  cfg.gamma_sp = 1.0e6;
  cfg.t_write = 2.0e-6;
  const ModeBasis basis = cfg.make_basis();
  cfg.diffusion_D = 0.5e6 / mode_mean_Ksq(basis, 0, cfg.optical);
  CHECK(mean_occupation(0, cfg, basis) == doctest::Approx(std::exp(3.0) - 1.0).epsilon(1e-9));

  // negative growth never yields negative occupation
  cfg.zeta_sq = 0.5e6;
  CHECK(mean_occupation(0, cfg, basis) == 0.0);
}

TEST_CASE("stokes shot with empty occupations is dark") {
  ExperimentConfig cfg = small_config();
  cfg.zeta_sq = 0.0;
  const ModeBasis basis = cfg.make_basis();
  RandomStream rng(cfg.seed, 0);
  const ShotResult shot = sample_stokes_shot(basis, cfg, rng);
  for (double v : shot.stokes_frame.data) CHECK(v == 0.0);
  CHECK(shot.spin_wave.energy() == 0.0);
}

TEST_CASE("single mode shots are thermal") {
  ExperimentConfig cfg = small_config();
  cfg.n_modes = 1;
  const ModeBasis basis = cfg.make_basis();
  const double n_mean = mean_occupation(0, cfg, basis);
  REQUIRE(n_mean > 1.0);

  const int n_shots = 20000;
  double s1 = 0.0, s2 = 0.0;
  std::complex<double> c_mean{};
  for (int i = 0; i < n_shots; ++i) {
    RandomStream rng(cfg.seed, static_cast<std::uint64_t>(i));
    const ShotResult shot = sample_stokes_shot(basis, cfg, rng);
    double total = 0.0;
    for (double v : shot.stokes_frame.data) total += v;
    // pattern is |u0|^2 scaled by |c0|^2
    CHECK(total == doctest::Approx(std::norm(shot.mode_amplitudes[0])).epsilon(1e-9));
    s1 += total;
    s2 += total * total;
    c_mean += shot.mode_amplitudes[0];
  }
  const double m = s1 / n_shots;
  // thermal: <I> = n_mean, <I^2>/<I>^2 = 2, <c> = 0
  CHECK(m == doctest::Approx(n_mean).epsilon(3.0 / std::sqrt(static_cast<double>(n_shots))));
  CHECK(s2 / n_shots / (m * m) == doctest::Approx(2.0).epsilon(0.05));
  CHECK(std::abs(c_mean) / n_shots < 3.0 * std::sqrt(n_mean / n_shots));
}

TEST_CASE("thermal marginals for every mode") {
  ExperimentConfig cfg = small_config();
  const ModeBasis basis = cfg.make_basis();
  const int nm = basis.n_modes();
  const int n_shots = 10000;
  std::vector<double> mod2(nm, 0.0);
  std::vector<std::complex<double>> mean(nm);
  for (int i = 0; i < n_shots; ++i) {
    RandomStream rng(cfg.seed, static_cast<std::uint64_t>(i));
    const ShotResult shot = sample_stokes_shot(basis, cfg, rng);
    for (int m = 0; m < nm; ++m) {
      mod2[m] += std::norm(shot.mode_amplitudes[m]);
      mean[m] += shot.mode_amplitudes[m];
    }
  }
  for (int m = 0; m < nm; ++m) {
    const double n_mean = mean_occupation(m, cfg, basis);
    const double est = mod2[m] / n_shots;
    // |c|^2 is exponential: sd of the mean estimate is n_mean/sqrt(n)
    CHECK(std::abs(est - n_mean) < 3.0 * n_mean / std::sqrt(static_cast<double>(n_shots)));
    CHECK(std::abs(mean[m]) / n_shots < 3.0 * std::sqrt(n_mean / n_shots));
  }
}

TEST_CASE("energy bookkeeping") {
  ExperimentConfig cfg = small_config();
  const ModeBasis basis = cfg.make_basis();
  double n_total = 0.0;
  for (int m = 0; m < basis.n_modes(); ++m) n_total += mean_occupation(m, cfg, basis);

  // expected integrated intensity = sum_m n_m * sum |u_m|^2 = sum_m n_m
  double expected = 0.0;
  for (int m = 0; m < basis.n_modes(); ++m) {
    double norm = 0.0;
    for (const auto& v : basis.modes[m].data) norm += std::norm(v);
    expected += mean_occupation(m, cfg, basis) * norm;
  }
  CHECK(std::abs(expected - n_total) / n_total < 0.01);
}

TEST_CASE("mirror correlation of ideal retrieval") {
  ExperimentConfig cfg = small_config();
  cfg.eta = 1.0;
  cfg.epsilon = 0.0;
  cfg.t_store = 0.0;
  cfg.read_blur = 0.0;
  const ModeBasis basis = cfg.make_basis();
  RandomStream rng(cfg.seed, 3);
  ShotResult shot = sample_stokes_shot(basis, cfg, rng);
  const SpinWaveState decayed = decay_spin_wave(shot.spin_wave, cfg.t_store, cfg);
  const RealImage as = retrieve_anti_stokes(decayed, cfg, rng);
  const AngularGrid& g = cfg.grid;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      CHECK(as.at(ix, iy) == shot.stokes_frame.at(g.nx - 1 - ix, g.ny - 1 - iy));
}

TEST_CASE("spin wave decay follows D K^2") {
  ExperimentConfig cfg = small_config();
  cfg.diffusion_D = 146e-4;
  // integer-center grid so theta = 2 mrad falls exactly on a pixel
  cfg.grid = AngularGrid(64, 64, 1e-4, 32.0, 32.0);
  SpinWaveState s;
  s.amplitude = ComplexImage(64, 64, std::complex<double>(1.0, 0.0));

  const SpinWaveState at_t0 = decay_spin_wave(s, 0.0, cfg);
  for (std::size_t i = 0; i < s.amplitude.data.size(); ++i)
    CHECK(at_t0.amplitude.data[i] == s.amplitude.data[i]);

  const double ks = cfg.optical.k_stokes();
  const double Kz2 = cfg.optical.K_z() * cfg.optical.K_z();

  // intensity decay rate at theta = 2 mrad is D k_s^2 theta^2 (+ D K_z^2),
  // about 3.65e6 1/s for 146 cm^2/s at 795 nm
  std::vector<double> t, intensity;
  for (double ts = 0.0; ts < 1.01e-6; ts += 0.2e-6) {
    const SpinWaveState d = decay_spin_wave(s, ts, cfg);
    t.push_back(ts);
    intensity.push_back(std::norm(d.amplitude.at(52, 32))); // theta_x = 2 mrad
  }
  const ExponentialFit fit = fit_exponential(t, intensity, ExpSign::decay);
  const double theta = 2e-3;
  const double gamma_expected = cfg.diffusion_D * (ks * ks * theta * theta + Kz2);
  CHECK(fit.rate == doctest::Approx(gamma_expected).epsilon(1e-6));
  CHECK(gamma_expected == doctest::Approx(3.65e6).epsilon(0.01));

  // K_perp = 0 still decays through the longitudinal component; the rate is
  // ~300 1/s, so sample on a millisecond scale to make the fit identifiable
  std::vector<double> t_long, t0_int;
  for (double ts = 0.0; ts < 1.01e-2; ts += 2e-3) {
    t_long.push_back(ts);
    t0_int.push_back(std::norm(decay_spin_wave(s, ts, cfg).amplitude.at(32, 32)));
  }
  const ExponentialFit fit0 = fit_exponential(t_long, t0_int, ExpSign::decay);
  CHECK(fit0.rate == doctest::Approx(cfg.diffusion_D * Kz2).epsilon(1e-3));
}

TEST_CASE("retrieval with eta zero is dark") {
  ExperimentConfig cfg = small_config();
  cfg.eta = 0.0;
  SpinWaveState s;
  s.amplitude = ComplexImage(64, 64, std::complex<double>(1.0, 1.0));
  RandomStream rng(1, 1);
  const RealImage img = retrieve_anti_stokes(s, cfg, rng);
  for (double v : img.data) CHECK(v == 0.0);
}

TEST_CASE("point-like spin wave retrieves at the mirrored angle") {
  ExperimentConfig cfg = small_config();
  cfg.read_blur = 0.26e-3;
  const AngularGrid& g = cfg.grid;
  SpinWaveState s;
  s.amplitude = ComplexImage(g.nx, g.ny);
  // K_perp = k_s * (1 mrad, 0): pixel at theta_x closest to +1 mrad
  int px = 0;
  double best = 1e9;
  for (int ix = 0; ix < g.nx; ++ix)
    if (std::abs(g.theta_x(ix) - 1e-3) < best) {
      best = std::abs(g.theta_x(ix) - 1e-3);
      px = ix;
    }
  const int py = g.ny / 2;
  s.amplitude.at(px, py) = 1.0;

  RandomStream rng(1, 1);
  const RealImage img = retrieve_anti_stokes(s, cfg, rng);
  int mx = 0, my = 0;
  double vmax = -1.0;
  for (int iy = 0; iy < g.ny; ++iy)
    for (int ix = 0; ix < g.nx; ++ix)
      if (img.at(ix, iy) > vmax) {
        vmax = img.at(ix, iy);
        mx = ix;
        my = iy;
      }
  CHECK(mx == g.nx - 1 - px);
  CHECK(my == g.ny - 1 - py);
  CHECK(g.theta_x(mx) == doctest::Approx(-1e-3).epsilon(0.08));
}

TEST_CASE("read-stage leakage adds a same-side spot") {
  ExperimentConfig cfg = small_config();
  cfg.read_blur = 0.0;
  cfg.eta = 1.0;
  cfg.epsilon = 0.3;
  const AngularGrid& g = cfg.grid;
  SpinWaveState s;
  s.amplitude = ComplexImage(g.nx, g.ny);
  s.amplitude.at(45, 32) = 1.0;
  RandomStream rng(9, 0);
  const RealImage img = retrieve_anti_stokes(s, cfg, rng);
  CHECK(img.at(g.nx - 1 - 45, g.ny - 1 - 32) == doctest::Approx(1.0)); // mirrored retrieval
  CHECK(img.at(45, 32) > 0.0);                                         // same-side leak
}

TEST_CASE("detector model") {
  DetectorModel det;
  RandomStream rng(6, 0);

  SUBCASE("all zero") {
    const RealImage zero(16, 16);
    const RealImage out = render_detected_frame(zero, det, rng);
    for (double v : out.data) CHECK(v == 0.0);
  }

  SUBCASE("background mean recovered over many frames") {
    det.background_mean = RealImage(16, 16, 7.5);
    det.read_noise_sigma = 2.0;
    const RealImage zero(16, 16);
    double sum = 0.0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
      RandomStream r(6, static_cast<std::uint64_t>(i));
      const RealImage out = render_detected_frame(zero, det, r);
      for (double v : out.data) sum += v;
    }
    const double per_pixel = sum / (n * 16.0 * 16.0);
    CHECK(per_pixel == doctest::Approx(7.5).epsilon(0.01));
  }

  SUBCASE("shot noise variance") {
    det.shot_noise = true;
    det.counts_per_photon = 3.0;
    const RealImage flat(8, 8, 100.0);
    const int n = 10000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
      RandomStream r(7, static_cast<std::uint64_t>(i));
      const RealImage out = render_detected_frame(flat, det, r);
      const double v = out.at(3, 3);
      s += v;
      s2 += v * v;
    }
    const double m = s / n;
    const double var = s2 / n - m * m;
    CHECK(m == doctest::Approx(300.0).epsilon(0.02));
    // var = 100 * gain^2 = 900; sampling sd of the variance is ~ var*sqrt(2/n)
    CHECK(var == doctest::Approx(900.0).epsilon(0.06));
  }
}

TEST_CASE("run_sequence determinism and threading") {
  ExperimentConfig cfg = small_config();
  cfg.detector.shot_noise = true;
  cfg.detector.read_noise_sigma = 1.0;
  cfg.detector.background_mean = RealImage(cfg.grid.nx, cfg.grid.ny, 2.0);

  const SequenceResult a = run_sequence(cfg, 20);
  const SequenceResult b = run_sequence(cfg, 20);
  const SequenceResult c = run_sequence(cfg, 20, 4);
  REQUIRE(a.stokes.n_frames() == 20);
  REQUIRE(a.background.n_frames() == cfg.n_background);
  for (int f = 0; f < 20; ++f) {
    CHECK(a.stokes.frames[f] == b.stokes.frames[f]);
    CHECK(a.anti_stokes.frames[f] == b.anti_stokes.frames[f]);
    CHECK(a.stokes.frames[f] == c.stokes.frames[f]);
    CHECK(a.anti_stokes.frames[f] == c.anti_stokes.frames[f]);
  }
  for (int f = 0; f < cfg.n_background; ++f) CHECK(a.background.frames[f] == c.background.frames[f]);

  ExperimentConfig other = cfg;
  other.seed = cfg.seed + 1;
  const SequenceResult d = run_sequence(other, 20);
  CHECK(a.stokes.frames[0] != d.stokes.frames[0]);
}

TEST_CASE("infinite storage leaves only background") {
  ExperimentConfig cfg = small_config();
  cfg.t_store = 1.0; // seconds; K_z alone kills everything well before this
  cfg.detector.background_mean = RealImage(cfg.grid.nx, cfg.grid.ny, 5.0);
  const SequenceResult r = run_sequence(cfg, 5);
  for (const auto& frame : r.anti_stokes.frames)
    for (float v : frame) CHECK(v == doctest::Approx(5.0).epsilon(1e-9));
}
