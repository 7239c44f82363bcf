#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "raman/errors.hpp"

namespace raman {

// Row-major image, indexed (x, y) with y selecting the row.
template <typename T>
struct Image {
  int nx = 0;
  int ny = 0;
  std::vector<T> data;

  Image() = default;
  Image(int nx_, int ny_, T fill = T{}) : nx(nx_), ny(ny_), data(static_cast<std::size_t>(nx_) * ny_, fill) {}

  T& at(int x, int y) { return data[static_cast<std::size_t>(y) * nx + x]; }
  const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * nx + x]; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& other) const { return nx == other.nx && ny == other.ny; }
};

using RealImage = Image<double>;
using ComplexImage = Image<std::complex<double>>;

// Far-field angular grid. Pixel (ix, iy) maps to scattering angles
// theta = (ix - cx, iy - cy) * pitch relative to the driving beam direction.
struct AngularGrid {
  int nx = 0;
  int ny = 0;
  double pitch = 0.0; // rad per pixel
  double cx = 0.0;    // px
  double cy = 0.0;    // px

  AngularGrid() = default;
  AngularGrid(int nx_, int ny_, double pitch_, double cx_, double cy_)
      : nx(nx_), ny(ny_), pitch(pitch_), cx(cx_), cy(cy_) {
    if (nx < 16 || ny < 16) throw config_error("AngularGrid: grid must be at least 16x16");
    if (pitch <= 0.0) throw config_error("AngularGrid: pitch must be positive");
    if (cx < 0.0 || cx > nx - 1 || cy < 0.0 || cy > ny - 1)
      throw config_error("AngularGrid: center must lie inside the grid");
  }

  // Centered square grid of n x n pixels.
  static AngularGrid centered(int n, double pitch) {
    return AngularGrid(n, n, pitch, 0.5 * (n - 1), 0.5 * (n - 1));
  }

  double theta_x(int ix) const { return (ix - cx) * pitch; }
  double theta_y(int iy) const { return (iy - cy) * pitch; }
  double theta_r(int ix, int iy) const {
    const double tx = theta_x(ix), ty = theta_y(iy);
    return std::sqrt(tx * tx + ty * ty);
  }

  // Maximum angular half-extent that fits in every direction from the center.
  double half_extent() const {
    const double hx = std::min(cx, nx - 1 - cx) * pitch;
    const double hy = std::min(cy, ny - 1 - cy) * pitch;
    return std::min(hx, hy);
  }

  bool operator==(const AngularGrid&) const = default;
};

} // namespace raman
