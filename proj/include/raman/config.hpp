#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "raman/errors.hpp"
#include "raman/simulate.hpp"

namespace raman {

// One structured document drives both simulation and analysis. Units are
// carried in the key names; unknown keys are rejected.
struct ConfigDocument {
  // optical
  double lambda_write_nm = 795.0;
  double stokes_shift_ghz = 6.8;
  // cell
  double length_mm = 100.0;
  double write_waist_mm = 2.16;
  double read_waist_mm = 1.76;
  double tilt_mrad = 13.0;
  // gas
  std::string gas_name = "Kr-1torr";
  double diffusion_cm2_s = 146.0;
  // rates
  double zeta_sq_per_s = 0.0;
  double gamma_sp_per_s = 0.0;
  // pulses
  double t_write_us = 0.5;
  double t_store_us = 0.0;
  double t_read_us = 2.0;
  // sim
  int n_modes = 1;
  int grid_n = 128;
  double pitch_urad = 76.0;
  std::uint64_t seed = 1;
  int n_frames = 500;
  int n_background = 100;
  double w0_mrad = 0.0;      // 0: derive from the fundamental mode spread
  double gain_fresnel = 0.0; // 0: compute from the write waist
  // detector
  double background_mean = 0.0;
  double read_noise_sigma = 0.0;
  bool shot_noise = false;
  double counts_per_photon = 1.0;
  // retrieval
  double eta = 1.0;
  double epsilon = 0.0;
  double read_blur_mrad = 0.26;

  std::string config_hash; // FNV-1a of the canonical serialized form

  ExperimentConfig to_experiment() const {
    ExperimentConfig cfg;
    cfg.optical = OpticalConstants(lambda_write_nm * 1e-9, stokes_shift_ghz * 1e9);
    cfg.cell = CellGeometry(length_mm * 1e-3, write_waist_mm * 1e-3, read_waist_mm * 1e-3, tilt_mrad * 1e-3);
    cfg.diffusion_D = diffusion_cm2_s * 1e-4;
    cfg.zeta_sq = zeta_sq_per_s;
    cfg.gamma_sp = gamma_sp_per_s;
    cfg.t_write = t_write_us * 1e-6;
    cfg.t_store = t_store_us * 1e-6;
    cfg.t_read = t_read_us * 1e-6;
    cfg.eta = eta;
    cfg.epsilon = epsilon;
    cfg.read_blur = read_blur_mrad * 1e-3;
    cfg.grid = AngularGrid::centered(grid_n, pitch_urad * 1e-6);
    cfg.detector.background_mean = RealImage(grid_n, grid_n, background_mean);
    cfg.detector.read_noise_sigma = read_noise_sigma;
    cfg.detector.shot_noise = shot_noise;
    cfg.detector.counts_per_photon = counts_per_photon;
    cfg.n_modes = n_modes;
    cfg.n_background = n_background;
    cfg.seed = seed;
    cfg.w0 = w0_mrad * 1e-3;
    cfg.gain_fresnel = gain_fresnel;
    cfg.validate();
    return cfg;
  }
};

namespace detail {

inline std::string fnv1a_hex(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

class SectionReader {
public:
  SectionReader(const nlohmann::json& doc, const std::string& section) : section_(section) {
    if (!doc.contains(section)) throw config_error("missing section '" + section + "'");
    obj_ = &doc.at(section);
    if (!obj_->is_object()) throw config_error("section '" + section + "' must be an object");
  }

  template <typename T>
  void require(const char* key, T& out) {
    if (!obj_->contains(key)) throw config_error("missing key '" + section_ + "." + key + "'");
    read(key, out);
  }

  template <typename T>
  void optional(const char* key, T& out) {
    if (obj_->contains(key)) read(key, out);
  }

  void finish() const {
    for (const auto& [key, _] : obj_->items())
      if (!seen_.contains(key)) throw config_error("unknown key '" + section_ + "." + key + "'");
  }

private:
  template <typename T>
  void read(const char* key, T& out) {
    try {
      out = obj_->at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw config_error("key '" + section_ + "." + key + "' has the wrong type");
    }
    seen_.insert(key);
  }

  const nlohmann::json* obj_;
  std::string section_;
  std::set<std::string> seen_;
};

} // namespace detail

inline ConfigDocument parse_config(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw config_error(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw config_error("config must be a JSON object");

  ConfigDocument c;
  {
    detail::SectionReader s(doc, "optical");
    s.require("lambda_write_nm", c.lambda_write_nm);
    s.require("stokes_shift_ghz", c.stokes_shift_ghz);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "cell");
    s.require("length_mm", c.length_mm);
    s.require("write_waist_mm", c.write_waist_mm);
    s.require("read_waist_mm", c.read_waist_mm);
    s.require("tilt_mrad", c.tilt_mrad);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "gas");
    s.require("name", c.gas_name);
    s.require("diffusion_cm2_s", c.diffusion_cm2_s);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "rates");
    s.require("zeta_sq_per_s", c.zeta_sq_per_s);
    s.require("gamma_sp_per_s", c.gamma_sp_per_s);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "pulses");
    s.require("t_write_us", c.t_write_us);
    s.require("t_store_us", c.t_store_us);
    s.require("t_read_us", c.t_read_us);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "sim");
    s.require("n_modes", c.n_modes);
    s.require("grid_n", c.grid_n);
    s.require("pitch_urad", c.pitch_urad);
    s.require("seed", c.seed);
    s.require("n_frames", c.n_frames);
    s.require("n_background", c.n_background);
    s.optional("w0_mrad", c.w0_mrad);
    s.optional("gain_fresnel", c.gain_fresnel);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "detector");
    s.require("background_mean", c.background_mean);
    s.require("read_noise_sigma", c.read_noise_sigma);
    s.require("shot_noise", c.shot_noise);
    s.require("counts_per_photon", c.counts_per_photon);
    s.finish();
  }
  {
    detail::SectionReader s(doc, "retrieval");
    s.require("eta", c.eta);
    s.require("epsilon", c.epsilon);
    s.optional("read_blur_mrad", c.read_blur_mrad);
    s.finish();
  }
  for (const auto& [key, _] : doc.items()) {
    static const std::set<std::string> known = {"optical", "cell",     "gas",      "rates",
                                               "pulses",  "sim",      "detector", "retrieval"};
    if (!known.contains(key)) throw config_error("unknown section '" + key + "'");
  }

  c.config_hash = detail::fnv1a_hex(doc.dump());
  return c;
}

inline ConfigDocument load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw io_error("cannot open config: " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config(ss.str());
  } catch (const config_error& e) {
    throw config_error(path.string() + ": " + e.what());
  }
}

} // namespace raman
