#pragma once

#include <cmath>
#include <cstdint>

#include "regflow/grid.hpp"

// Linear interpolation with zero padding: samples outside the grid read 0,
// so the interpolant is continuous everywhere and decays to 0 within one
// voxel of the border.

namespace regflow {

struct Sample2 {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

struct Sample3 {
  double value = 0.0;
  double dx = 0.0;
  double dy = 0.0;
  double dz = 0.0;
};

namespace detail {

struct Corners2 {
  double v00, v10, v01, v11;
  double fx, fy;
};

template <typename T>
inline Corners2 corners(const Grid2<T>& img, double x, double y) {
  const double xf = std::floor(x);
  const double yf = std::floor(y);
  const auto x0 = static_cast<std::int64_t>(xf);
  const auto y0 = static_cast<std::int64_t>(yf);
  Corners2 c{};
  c.fx = x - xf;
  c.fy = y - yf;
  if (x0 >= 0 && y0 >= 0 && x0 + 1 < img.nx() && y0 + 1 < img.ny()) {
    const auto i = img.index(x0, y0);
    c.v00 = static_cast<double>(img[i]);
    c.v10 = static_cast<double>(img[i + 1]);
    c.v01 = static_cast<double>(img[i + img.nx()]);
    c.v11 = static_cast<double>(img[i + img.nx() + 1]);
  } else {
    c.v00 = static_cast<double>(img.at_or_zero(x0, y0));
    c.v10 = static_cast<double>(img.at_or_zero(x0 + 1, y0));
    c.v01 = static_cast<double>(img.at_or_zero(x0, y0 + 1));
    c.v11 = static_cast<double>(img.at_or_zero(x0 + 1, y0 + 1));
  }
  return c;
}

inline bool far_outside(double x, std::int64_t n) { return x <= -1.0 || x >= static_cast<double>(n); }

}  // namespace detail

template <typename T>
[[nodiscard]] double sample_bilinear(const Grid2<T>& img, double x, double y) {
  if (detail::far_outside(x, img.nx()) || detail::far_outside(y, img.ny())) return 0.0;
  const auto c = detail::corners(img, x, y);
  const double top = c.v00 + c.fx * (c.v10 - c.v00);
  const double bottom = c.v01 + c.fx * (c.v11 - c.v01);
  return top + c.fy * (bottom - top);
}

/// Bilinear sample plus the derivative of the interpolant w.r.t. (x, y).
template <typename T>
[[nodiscard]] Sample2 sample_bilinear_grad(const Grid2<T>& img, double x, double y) {
  if (detail::far_outside(x, img.nx()) || detail::far_outside(y, img.ny())) return {};
  const auto c = detail::corners(img, x, y);
  const double top = c.v00 + c.fx * (c.v10 - c.v00);
  const double bottom = c.v01 + c.fx * (c.v11 - c.v01);
  Sample2 s;
  s.value = top + c.fy * (bottom - top);
  s.dx = (1.0 - c.fy) * (c.v10 - c.v00) + c.fy * (c.v11 - c.v01);
  s.dy = bottom - top;
  return s;
}

namespace detail {

struct Corners3 {
  double v[8];  // bit 0: +x, bit 1: +y, bit 2: +z
  double fx, fy, fz;
};

template <typename T>
inline Corners3 corners(const Grid3<T>& vol, double x, double y, double z) {
  const double xf = std::floor(x);
  const double yf = std::floor(y);
  const double zf = std::floor(z);
  const auto x0 = static_cast<std::int64_t>(xf);
  const auto y0 = static_cast<std::int64_t>(yf);
  const auto z0 = static_cast<std::int64_t>(zf);
  Corners3 c{};
  c.fx = x - xf;
  c.fy = y - yf;
  c.fz = z - zf;
  const Dims3& d = vol.dims();
  if (x0 >= 0 && y0 >= 0 && z0 >= 0 && x0 + 1 < d.nx && y0 + 1 < d.ny && z0 + 1 < d.nz) {
    const auto i = vol.index(x0, y0, z0);
    const auto sy = d.nx;
    const auto sz = d.nx * d.ny;
    c.v[0] = static_cast<double>(vol[i]);
    c.v[1] = static_cast<double>(vol[i + 1]);
    c.v[2] = static_cast<double>(vol[i + sy]);
    c.v[3] = static_cast<double>(vol[i + sy + 1]);
    c.v[4] = static_cast<double>(vol[i + sz]);
    c.v[5] = static_cast<double>(vol[i + sz + 1]);
    c.v[6] = static_cast<double>(vol[i + sz + sy]);
    c.v[7] = static_cast<double>(vol[i + sz + sy + 1]);
  } else {
    for (int k = 0; k < 8; ++k) {
      c.v[k] = static_cast<double>(vol.at_or_zero(x0 + (k & 1), y0 + ((k >> 1) & 1), z0 + ((k >> 2) & 1)));
    }
  }
  return c;
}

}  // namespace detail

template <typename T>
[[nodiscard]] double sample_trilinear(const Grid3<T>& vol, double x, double y, double z) {
  const Dims3& d = vol.dims();
  if (detail::far_outside(x, d.nx) || detail::far_outside(y, d.ny) || detail::far_outside(z, d.nz)) {
    return 0.0;
  }
  const auto c = detail::corners(vol, x, y, z);
  const double x00 = c.v[0] + c.fx * (c.v[1] - c.v[0]);
  const double x10 = c.v[2] + c.fx * (c.v[3] - c.v[2]);
  const double x01 = c.v[4] + c.fx * (c.v[5] - c.v[4]);
  const double x11 = c.v[6] + c.fx * (c.v[7] - c.v[6]);
  const double y0 = x00 + c.fy * (x10 - x00);
  const double y1 = x01 + c.fy * (x11 - x01);
  return y0 + c.fz * (y1 - y0);
}

/// Trilinear sample plus the derivative of the interpolant w.r.t. (x, y, z).
template <typename T>
[[nodiscard]] Sample3 sample_trilinear_grad(const Grid3<T>& vol, double x, double y, double z) {
  const Dims3& d = vol.dims();
  if (detail::far_outside(x, d.nx) || detail::far_outside(y, d.ny) || detail::far_outside(z, d.nz)) {
    return {};
  }
  const auto c = detail::corners(vol, x, y, z);
  const double x00 = c.v[0] + c.fx * (c.v[1] - c.v[0]);
  const double x10 = c.v[2] + c.fx * (c.v[3] - c.v[2]);
  const double x01 = c.v[4] + c.fx * (c.v[5] - c.v[4]);
  const double x11 = c.v[6] + c.fx * (c.v[7] - c.v[6]);
  const double y0 = x00 + c.fy * (x10 - x00);
  const double y1 = x01 + c.fy * (x11 - x01);

  const double dx00 = c.v[1] - c.v[0];
  const double dx10 = c.v[3] - c.v[2];
  const double dx01 = c.v[5] - c.v[4];
  const double dx11 = c.v[7] - c.v[6];
  const double dxy0 = dx00 + c.fy * (dx10 - dx00);
  const double dxy1 = dx01 + c.fy * (dx11 - dx01);

  Sample3 s;
  s.value = y0 + c.fz * (y1 - y0);
  s.dx = dxy0 + c.fz * (dxy1 - dxy0);
  s.dy = (1.0 - c.fz) * (x10 - x00) + c.fz * (x11 - x01);
  s.dz = y1 - y0;
  return s;
}

}  // namespace regflow
