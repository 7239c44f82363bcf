#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "raman/errors.hpp"
#include "raman/grid.hpp"

namespace raman {

// Ordered stack of detector intensity frames plus the geometry needed to
// interpret them. The unit of analysis.
struct FrameStack {
  int width = 0;
  int height = 0;
  // Canonical pitch unit is urad/px, matching the header field, so that
  // serialization round-trips bit-exactly without unit conversions.
  double pitch_urad = 0.0;
  double cx = 0.0; // px
  double cy = 0.0; // px
  std::string label;  // stokes | antistokes | background
  std::string config_hash;
  std::uint64_t seed = 0;
  // Region center on the physical sensor, bookkeeping for the beam tilt.
  double region_center_x_mrad = 0.0;
  double region_center_y_mrad = 0.0;
  std::vector<std::vector<float>> frames;

  int n_frames() const { return static_cast<int>(frames.size()); }
  std::size_t frame_size() const { return static_cast<std::size_t>(width) * height; }

  double pitch() const { return pitch_urad * 1e-6; } // rad/px
  AngularGrid grid() const { return AngularGrid(width, height, pitch(), cx, cy); }
};

namespace detail {

inline constexpr std::array<char, 4> fstk_magic = {'F', 'S', 'T', 'K'};
inline constexpr std::uint32_t fstk_version = 1;

inline void put_u32le(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace detail

// Serialize to the FSTK container: magic, version (u32 LE), header length
// (u32 LE), UTF-8 JSON header, then n_frames*width*height float32 LE samples
// in row-major frame order.
inline std::string frame_stack_to_bytes(const FrameStack& s) {
  nlohmann::json header = {
      {"width", s.width},
      {"height", s.height},
      {"n_frames", s.n_frames()},
      {"pitch_urad", s.pitch_urad},
      {"center_px", {s.cx, s.cy}},
      {"label", s.label},
      {"config_hash", s.config_hash},
      {"seed", s.seed},
      {"region_center_mrad", {s.region_center_x_mrad, s.region_center_y_mrad}},
  };
  const std::string htext = header.dump();

  std::string out;
  out.reserve(12 + htext.size() + s.frames.size() * s.frame_size() * 4);
  out.append(detail::fstk_magic.data(), 4);
  detail::put_u32le(out, detail::fstk_version);
  detail::put_u32le(out, static_cast<std::uint32_t>(htext.size()));
  out += htext;

  static_assert(sizeof(float) == 4);
  for (const auto& frame : s.frames) {
    if (frame.size() != s.frame_size()) throw io_error("FrameStack: frame size mismatch");
    const std::size_t pos = out.size();
    out.resize(pos + frame.size() * 4);
    // float32 little-endian; this build targets little-endian hosts
    std::memcpy(out.data() + pos, frame.data(), frame.size() * 4);
  }
  return out;
}

inline FrameStack frame_stack_from_bytes(const std::string& bytes) {
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 12) throw io_error("FSTK: file truncated before header");
  if (std::memcmp(p, detail::fstk_magic.data(), 4) != 0) throw io_error("FSTK: bad magic");
  const std::uint32_t version = detail::get_u32le(p + 4);
  if (version != detail::fstk_version) throw io_error("FSTK: unsupported format version " + std::to_string(version));
  const std::uint32_t hlen = detail::get_u32le(p + 8);
  if (bytes.size() < 12 + static_cast<std::size_t>(hlen)) throw io_error("FSTK: file truncated inside header");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(12, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("FSTK: malformed header: ") + e.what());
  }

  FrameStack s;
  try {
    s.width = header.at("width").get<int>();
    s.height = header.at("height").get<int>();
    const int n_frames = header.at("n_frames").get<int>();
    s.pitch_urad = header.at("pitch_urad").get<double>();
    s.cx = header.at("center_px").at(0).get<double>();
    s.cy = header.at("center_px").at(1).get<double>();
    s.label = header.at("label").get<std::string>();
    s.config_hash = header.at("config_hash").get<std::string>();
    s.seed = header.at("seed").get<std::uint64_t>();
    if (header.contains("region_center_mrad")) {
      s.region_center_x_mrad = header.at("region_center_mrad").at(0).get<double>();
      s.region_center_y_mrad = header.at("region_center_mrad").at(1).get<double>();
    }

    if (s.width <= 0 || s.height <= 0 || n_frames < 0) throw io_error("FSTK: non-positive dimensions in header");
    const std::size_t expected = static_cast<std::size_t>(n_frames) * s.frame_size() * 4;
    const std::size_t payload = bytes.size() - 12 - hlen;
    if (payload != expected)
      throw io_error("FSTK: payload size " + std::to_string(payload) + " does not match header arithmetic " +
                     std::to_string(expected));

    s.frames.resize(n_frames);
    const char* src = bytes.data() + 12 + hlen;
    for (int f = 0; f < n_frames; ++f) {
      s.frames[f].resize(s.frame_size());
      std::memcpy(s.frames[f].data(), src, s.frame_size() * 4);
      src += s.frame_size() * 4;
    }
  } catch (const nlohmann::json::exception& e) {
    throw io_error(std::string("FSTK: missing or ill-typed header field: ") + e.what());
  }
  return s;
}

inline void write_frame_stack(const std::filesystem::path& path, const FrameStack& s) {
  const std::string bytes = frame_stack_to_bytes(s);
  // Write to a temp file then rename, so failures leave no partial output.
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot open for writing: " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) {
      f.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw io_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw io_error("cannot move into place: " + path.string());
  }
}

inline FrameStack read_frame_stack(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error("cannot open: " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return frame_stack_from_bytes(bytes);
}

} // namespace raman
