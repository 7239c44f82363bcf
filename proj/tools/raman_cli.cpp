// Command-line front end: simulation of write/store/read cycles and the
// image-statistics pipeline (decay sweeps, growth sweeps, correlation maps).
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "raman/analysis.hpp"
#include "raman/config.hpp"
#include "raman/fitting.hpp"
#include "raman/framestack.hpp"
#include "raman/simulate.hpp"

namespace {

constexpr int exit_ok = 0;
constexpr int exit_config = 2;
constexpr int exit_io = 3;
constexpr int exit_fit = 4;

struct GlobalOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  int threads = 1;
  std::optional<int> frames;
  bool strict = false;
};

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw raman::io_error("cannot open for writing: " + path.string());
  f << std::setprecision(10);
  return f;
}

raman::ConfigDocument load_doc(const GlobalOpts& g) {
  if (g.config_path.empty()) throw raman::config_error("--config is required");
  raman::ConfigDocument doc = raman::load_config(g.config_path);
  if (g.seed) doc.seed = *g.seed;
  return doc;
}

int frames_for(const GlobalOpts& g, const raman::ConfigDocument& doc) {
  const int n = g.frames.value_or(doc.n_frames);
  if (n < 1) throw raman::config_error("frame count must be at least 1");
  return n;
}

void print_stack_summary(const raman::FrameStack& s) {
  const raman::RealImage mean = raman::mean_image(s);
  double total = 0.0;
  int px = 0, py = 0;
  double vmax = -1e300;
  for (int iy = 0; iy < mean.ny; ++iy)
    for (int ix = 0; ix < mean.nx; ++ix) {
      total += mean.at(ix, iy);
      if (mean.at(ix, iy) > vmax) {
        vmax = mean.at(ix, iy);
        px = ix;
        py = iy;
      }
    }
  std::cout << s.label << ": " << s.n_frames() << " frames, mean total counts/frame " << total
            << ", peak at px (" << px << ", " << py << ")\n";
}

int cmd_simulate(const GlobalOpts& g) {
  const raman::ConfigDocument doc = load_doc(g);
  const raman::ExperimentConfig cfg = doc.to_experiment();
  const int n_frames = frames_for(g, doc);

  const raman::SequenceResult res = raman::run_sequence(cfg, n_frames, g.threads, doc.config_hash);

  std::filesystem::create_directories(g.out_dir);
  const std::filesystem::path out(g.out_dir);
  raman::write_frame_stack(out / "stokes.fstk", res.stokes);
  raman::write_frame_stack(out / "antistokes.fstk", res.anti_stokes);
  raman::write_frame_stack(out / "background.fstk", res.background);

  print_stack_summary(res.stokes);
  print_stack_summary(res.anti_stokes);
  print_stack_summary(res.background);
  return exit_ok;
}

// Mean background-subtracted intensity at the requested angles, from the
// polar profile of one simulated run.
std::vector<double> mean_profile_at_angles(const raman::ExperimentConfig& cfg, int n_frames, int threads,
                                           const std::string& hash, const std::vector<double>& angles_rad,
                                           bool use_antistokes, const raman::ModeBasis& basis) {
  const raman::SequenceResult res = raman::run_sequence(cfg, n_frames, threads, hash, &basis);
  const raman::FrameStack& stack = use_antistokes ? res.anti_stokes : res.stokes;
  const raman::FrameStack sub = raman::subtract_background(stack, res.background);
  const raman::RadialProfile prof = raman::polar_average(raman::mean_image(sub), stack.grid());
  std::vector<double> out;
  out.reserve(angles_rad.size());
  for (double a : angles_rad) out.push_back(raman::profile_value_at(prof, a));
  return out;
}

int cmd_decay_sweep(const GlobalOpts& g, const std::vector<double>& t_store_us,
                    const std::vector<double>& angles_mrad, bool unweighted) {
  if (t_store_us.size() < 3) throw raman::config_error("decay-sweep: need at least 3 storage times");
  if (angles_mrad.size() < 3) throw raman::config_error("decay-sweep: need at least 3 angles");

  const raman::ConfigDocument doc = load_doc(g);
  raman::ExperimentConfig cfg = doc.to_experiment();
  const int n_frames = frames_for(g, doc);
  const raman::ModeBasis basis = cfg.make_basis();

  std::vector<double> angles_rad;
  for (double a : angles_mrad) angles_rad.push_back(a * 1e-3);

  // intensity-vs-storage-time series per angle
  std::vector<std::vector<double>> series(angles_rad.size());
  std::vector<double> t_s;
  for (std::size_t ti = 0; ti < t_store_us.size(); ++ti) {
    raman::ExperimentConfig point = cfg;
    point.t_store = t_store_us[ti] * 1e-6;
    point.seed = cfg.seed + ti; // independent shots per storage time
    const auto vals = mean_profile_at_angles(point, n_frames, g.threads, doc.config_hash, angles_rad, true, basis);
    for (std::size_t ai = 0; ai < angles_rad.size(); ++ai) series[ai].push_back(vals[ai]);
    t_s.push_back(t_store_us[ti] * 1e-6);
  }

  std::filesystem::create_directories(g.out_dir);
  std::ofstream csv = open_csv(std::filesystem::path(g.out_dir) / "decay_sweep.csv");
  csv << "theta_mrad,gamma_per_us,sigma_gamma_per_us,converged\n";

  std::vector<double> fit_theta, fit_gamma, fit_weights;
  bool any_nonconverged = false;
  for (std::size_t ai = 0; ai < angles_rad.size(); ++ai) {
    // offset pinned at zero: the series is background-subtracted
    const raman::ExponentialFit fit = raman::fit_exponential(t_s, series[ai], raman::ExpSign::decay, {}, false);
    const bool usable = fit.converged && fit.sigma_rate > 0.0 && raman::decay_rate_resolvable(series[ai]);
    csv << angles_mrad[ai] << "," << fit.rate * 1e-6 << "," << fit.sigma_rate * 1e-6 << ","
        << (usable ? 1 : 0) << "\n";
    if (!usable) {
      any_nonconverged = true;
      continue; // excluded from the quadratic stage
    }
    fit_theta.push_back(angles_rad[ai]);
    fit_gamma.push_back(fit.rate);
    fit_weights.push_back(1.0 / (fit.sigma_rate * fit.sigma_rate));
  }
  if (unweighted) fit_weights.clear();

  const raman::RateVsAngleFit quad =
      unweighted ? raman::fit_rate_vs_angle(fit_theta, fit_gamma, cfg.optical.k_stokes())
                 : raman::fit_rate_vs_angle_robust(fit_theta, fit_gamma, cfg.optical.k_stokes(), fit_weights);
  csv << "D_cm2_s," << quad.D * 1e4 << "," << quad.sigma_D * 1e4 << "," << (quad.converged ? 1 : 0) << "\n";

  std::cout << std::setprecision(10) << "D = " << quad.D * 1e4 << " cm^2/s (sigma " << quad.sigma_D * 1e4
            << "), const = " << quad.constant * 1e-6 << " 1/us\n";
  if (any_nonconverged && g.strict) return exit_fit;
  return exit_ok;
}

int cmd_growth_sweep(const GlobalOpts& g, const std::vector<double>& t_write_us,
                     const std::vector<double>& angles_mrad) {
  if (t_write_us.size() < 4) throw raman::config_error("growth-sweep: need at least 4 write times");
  if (angles_mrad.empty()) throw raman::config_error("growth-sweep: need at least 1 angle");

  const raman::ConfigDocument doc = load_doc(g);
  raman::ExperimentConfig cfg = doc.to_experiment();
  const int n_frames = frames_for(g, doc);
  const raman::ModeBasis basis = cfg.make_basis();

  std::vector<double> angles_rad;
  for (double a : angles_mrad) angles_rad.push_back(a * 1e-3);

  std::vector<std::vector<double>> series(angles_rad.size());
  std::vector<double> t_s;
  for (std::size_t ti = 0; ti < t_write_us.size(); ++ti) {
    raman::ExperimentConfig point = cfg;
    point.t_write = t_write_us[ti] * 1e-6;
    point.seed = cfg.seed + ti;
    const auto vals = mean_profile_at_angles(point, n_frames, g.threads, doc.config_hash, angles_rad, false, basis);
    for (std::size_t ai = 0; ai < angles_rad.size(); ++ai) series[ai].push_back(vals[ai]);
    t_s.push_back(t_write_us[ti] * 1e-6);
  }

  std::filesystem::create_directories(g.out_dir);
  std::ofstream csv = open_csv(std::filesystem::path(g.out_dir) / "growth_sweep.csv");
  csv << "theta_mrad,kappa_per_us,sigma_kappa_per_us,converged\n";
  bool any_nonconverged = false;
  for (std::size_t ai = 0; ai < angles_rad.size(); ++ai) {
    const raman::ExponentialFit fit = raman::fit_exponential(t_s, series[ai], raman::ExpSign::growth);
    csv << angles_mrad[ai] << "," << fit.rate * 1e-6 << "," << fit.sigma_rate * 1e-6 << ","
        << (fit.converged ? 1 : 0) << "\n";
    if (!fit.converged) any_nonconverged = true;
    std::cout << std::setprecision(10) << "theta " << angles_mrad[ai] << " mrad: kappa = " << fit.rate * 1e-6
              << " 1/us\n";
  }
  if (any_nonconverged && g.strict) return exit_fit;
  return exit_ok;
}

void write_map_csv(const std::filesystem::path& path, const raman::CorrelationMap& map) {
  std::ofstream csv = open_csv(path);
  for (int iy = 0; iy < map.values.ny; ++iy) {
    for (int ix = 0; ix < map.values.nx; ++ix) {
      if (ix) csv << ",";
      csv << map.values.at(ix, iy);
    }
    csv << "\n";
  }
}

int cmd_correlations(const GlobalOpts& g, const std::string& stokes_path, const std::string& antistokes_path,
                     const std::string& background_path, double ref_x_mrad, double ref_y_mrad) {
  const raman::FrameStack stokes_raw = raman::read_frame_stack(stokes_path);
  const raman::FrameStack antistokes_raw = raman::read_frame_stack(antistokes_path);
  if (stokes_raw.n_frames() != antistokes_raw.n_frames())
    throw raman::estimator_error("correlations: stacks have different frame counts");
  if (stokes_raw.n_frames() < 1000)
    throw raman::estimator_error("correlations: need at least 1000 frames per stack");

  raman::FrameStack stokes = stokes_raw;
  raman::FrameStack antistokes = antistokes_raw;
  if (!background_path.empty()) {
    const raman::FrameStack bg = raman::read_frame_stack(background_path);
    stokes = raman::subtract_background(stokes, bg);
    antistokes = raman::subtract_background(antistokes, bg);
  }

  // geometry always comes from the stack header
  const raman::AngularGrid grid = stokes.grid();
  const int ref_px = static_cast<int>(std::lround(grid.cx + ref_x_mrad * 1e-3 / grid.pitch));
  const int ref_py = static_cast<int>(std::lround(grid.cy + ref_y_mrad * 1e-3 / grid.pitch));
  if (ref_px < 0 || ref_px >= grid.nx || ref_py < 0 || ref_py >= grid.ny)
    throw raman::estimator_error("correlations: reference direction outside the grid");

  const raman::CorrelationMap c_ss = raman::correlation_map(stokes, stokes, ref_px, ref_py, "ss");
  const raman::CorrelationMap c_as = raman::correlation_map(antistokes, stokes, ref_px, ref_py, "as");

  const raman::RadialProfile prof = raman::polar_average(raman::mean_image(stokes), grid);
  const raman::GaussianRadialFit avg_fit = raman::fit_gaussian_radial(prof.theta, prof.mean);
  const double w_avg = avg_fit.width;

  // mask the exact self-reference pixel, which sits above the smooth peak
  const raman::PeakFit ss_peak = raman::correlation_peak(c_ss, true);
  const double w_C = ss_peak.width;
  const double w_speckle = raman::speckle_width(stokes);
  const double N = raman::mode_count(w_avg, w_C);
  const raman::PeakFit as_peak = raman::correlation_peak(c_as);

  std::filesystem::create_directories(g.out_dir);
  const std::filesystem::path out(g.out_dir);
  write_map_csv(out / "c_ss.csv", c_ss);
  write_map_csv(out / "c_as.csv", c_as);

  std::ofstream csv = open_csv(out / "correlations.csv");
  csv << "quantity,value\n";
  csv << "w_avg_mrad," << w_avg * 1e3 << "\n";
  csv << "w_C_mrad," << w_C * 1e3 << "\n";
  csv << "w_speckle_mrad," << w_speckle * 1e3 << "\n";
  csv << "N," << N << "\n";
  csv << "ref_x_mrad," << ref_x_mrad << "\n";
  csv << "ref_y_mrad," << ref_y_mrad << "\n";
  csv << "conjugate_peak_x_mrad," << as_peak.theta_x * 1e3 << "\n";
  csv << "conjugate_peak_y_mrad," << as_peak.theta_y * 1e3 << "\n";

  std::cout << std::setprecision(10) << "w_avg = " << w_avg * 1e3 << " mrad, w_C = " << w_C * 1e3
            << " mrad, w_speckle = " << w_speckle * 1e3 << " mrad, N = " << N << "\n"
            << "conjugate peak at (" << as_peak.theta_x * 1e3 << ", " << as_peak.theta_y * 1e3 << ") mrad\n";

  if (g.strict && !(avg_fit.converged && ss_peak.converged && as_peak.converged)) return exit_fit;
  return exit_ok;
}

int cmd_info(const std::string& path) {
  const raman::FrameStack s = raman::read_frame_stack(path);
  std::cout << "label: " << s.label << "\n"
            << "frames: " << s.n_frames() << "\n"
            << "size: " << s.width << " x " << s.height << " px\n"
            << "pitch: " << s.pitch_urad << " urad/px\n"
            << "center: (" << s.cx << ", " << s.cy << ") px\n"
            << "region center: (" << s.region_center_x_mrad << ", " << s.region_center_y_mrad << ") mrad\n"
            << "seed: " << s.seed << "\n"
            << "config hash: " << s.config_hash << "\n";
  return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimode Raman scattering simulator and image-statistics pipeline"};
  app.require_subcommand(1);

  GlobalOpts g;
  app.add_option("--config", g.config_path, "Experiment configuration file (JSON)");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_option("--seed", g.seed, "Override the config seed");
  app.add_option("--threads", g.threads, "Worker threads for shot generation");
  app.add_option("--frames", g.frames, "Override the config frame count");
  app.add_flag("--strict", g.strict, "Exit 4 on any fit non-convergence");

  auto* sim = app.add_subcommand("simulate", "Generate Stokes/anti-Stokes/background stacks");

  std::vector<double> t_store_us{0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::vector<double> angles_mrad{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  bool unweighted = false;
  auto* decay = app.add_subcommand("decay-sweep", "Decay rates vs angle and the diffusion constant");
  decay->add_option("--t-store", t_store_us, "Storage times in us");
  decay->add_option("--angles", angles_mrad, "Angles in mrad");
  decay->add_flag("--unweighted", unweighted, "Disable 1/sigma^2 weighting of the quadratic fit");

  std::vector<double> t_write_us{0.1, 0.2, 0.3, 0.4, 0.5};
  std::vector<double> growth_angles_mrad{0.5, 1.0, 1.5, 2.0, 2.5, 3.0};
  auto* growth = app.add_subcommand("growth-sweep", "Growth rates vs angle");
  growth->add_option("--t-write", t_write_us, "Write pulse durations in us");
  growth->add_option("--angles", growth_angles_mrad, "Angles in mrad");

  std::string stokes_path, antistokes_path, background_path;
  double ref_x_mrad = 0.9, ref_y_mrad = -1.6;
  auto* corr = app.add_subcommand("correlations", "Correlation maps, widths and the mode count");
  corr->add_option("--stokes", stokes_path, "Stokes stack (.fstk)")->required();
  corr->add_option("--antistokes", antistokes_path, "Anti-Stokes stack (.fstk)")->required();
  corr->add_option("--background", background_path, "Background stack for subtraction");
  corr->add_option("--ref-x", ref_x_mrad, "Reference direction x (mrad)");
  corr->add_option("--ref-y", ref_y_mrad, "Reference direction y (mrad)");

  std::string info_path;
  auto* info = app.add_subcommand("info", "Dump a stack header");
  info->add_option("path", info_path, "Stack file")->required();

  // allow the global flags (--config, --out, ...) after the subcommand name
  for (auto* sub : {sim, decay, growth, corr, info}) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return cmd_simulate(g);
    if (decay->parsed()) return cmd_decay_sweep(g, t_store_us, angles_mrad, unweighted);
    if (growth->parsed()) return cmd_growth_sweep(g, t_write_us, growth_angles_mrad);
    if (corr->parsed()) return cmd_correlations(g, stokes_path, antistokes_path, background_path, ref_x_mrad, ref_y_mrad);
    if (info->parsed()) return cmd_info(info_path);
  } catch (const raman::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return exit_config;
  } catch (const raman::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return exit_io;
  } catch (const raman::estimator_error& e) {
    std::cerr << "estimator error: " << e.what() << "\n";
    return g.strict ? exit_fit : exit_io;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_ok;
}
