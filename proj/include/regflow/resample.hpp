#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "regflow/grid.hpp"
#include "regflow/interpolate.hpp"

namespace regflow {

/// 3x4 row-major affine matrix [a b c d; e f g h; i j k l] acting on
/// homogeneous voxel coordinates. A warp samples the input at A * (x,y,z,1)
/// for every output voxel (x,y,z).
struct AffineTransform {
  std::array<double, 12> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};

  [[nodiscard]] static AffineTransform identity() { return {}; }

  [[nodiscard]] static AffineTransform translation(double dx, double dy, double dz) {
    AffineTransform t;
    t.m[3] = dx;
    t.m[7] = dy;
    t.m[11] = dz;
    return t;
  }

  [[nodiscard]] double operator()(int row, int col) const { return m[static_cast<std::size_t>(row * 4 + col)]; }
  double& operator()(int row, int col) { return m[static_cast<std::size_t>(row * 4 + col)]; }

  [[nodiscard]] std::array<double, 3> apply(double x, double y, double z) const {
    return {m[0] * x + m[1] * y + m[2] * z + m[3], m[4] * x + m[5] * y + m[6] * z + m[7],
            m[8] * x + m[9] * y + m[10] * z + m[11]};
  }

  [[nodiscard]] double determinant() const {
    return m[0] * (m[5] * m[10] - m[6] * m[9]) - m[1] * (m[4] * m[10] - m[6] * m[8]) +
           m[2] * (m[4] * m[9] - m[5] * m[8]);
  }

  [[nodiscard]] bool invertible() const { return std::abs(determinant()) > 1e-12; }

  [[nodiscard]] AffineTransform inverse() const {
    const double det = determinant();
    if (!(std::abs(det) > 1e-12)) throw InvalidArgument("affine transform is singular");
    AffineTransform r;
    r.m[0] = (m[5] * m[10] - m[6] * m[9]) / det;
    r.m[1] = (m[2] * m[9] - m[1] * m[10]) / det;
    r.m[2] = (m[1] * m[6] - m[2] * m[5]) / det;
    r.m[4] = (m[6] * m[8] - m[4] * m[10]) / det;
    r.m[5] = (m[0] * m[10] - m[2] * m[8]) / det;
    r.m[6] = (m[2] * m[4] - m[0] * m[6]) / det;
    r.m[8] = (m[4] * m[9] - m[5] * m[8]) / det;
    r.m[9] = (m[1] * m[8] - m[0] * m[9]) / det;
    r.m[10] = (m[0] * m[5] - m[1] * m[4]) / det;
    for (int row = 0; row < 3; ++row) {
      r(row, 3) = -(r(row, 0) * m[3] + r(row, 1) * m[7] + r(row, 2) * m[11]);
    }
    return r;
  }

  /// Point-map composition: (a * b)(p) = a(b(p)).
  friend AffineTransform operator*(const AffineTransform& a, const AffineTransform& b) {
    AffineTransform r;
    for (int row = 0; row < 3; ++row) {
      for (int col = 0; col < 4; ++col) {
        double v = 0.0;
        for (int k = 0; k < 3; ++k) v += a(row, k) * b(k, col);
        if (col == 3) v += a(row, 3);
        r(row, col) = v;
      }
    }
    return r;
  }

  friend bool operator==(const AffineTransform&, const AffineTransform&) = default;
};

/// Voxel-space center of a grid, the pivot for rotations and scalings.
[[nodiscard]] inline std::array<double, 3> grid_center(const Dims3& d) {
  return {0.5 * static_cast<double>(d.nx - 1), 0.5 * static_cast<double>(d.ny - 1),
          0.5 * static_cast<double>(d.nz - 1)};
}

/// Warp transform that rotates image content by +degrees in the x-y plane
/// (x towards y) about `center`.
[[nodiscard]] inline AffineTransform content_rotation_z(double degrees, std::array<double, 3> center) {
  const double rad = -degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  AffineTransform t;
  t.m = {c, -s, 0, 0, s, c, 0, 0, 0, 0, 1, 0};
  t(0, 3) = center[0] - (c * center[0] - s * center[1]);
  t(1, 3) = center[1] - (s * center[0] + c * center[1]);
  return t;
}

/// Warp transform that magnifies image content by (sx, sy, sz) about `center`.
[[nodiscard]] inline AffineTransform content_scaling(double sx, double sy, double sz,
                                                     std::array<double, 3> center) {
  if (!(sx > 0 && sy > 0 && sz > 0)) throw InvalidArgument("scale factors must be > 0");
  AffineTransform t;
  t.m = {1.0 / sx, 0, 0, 0, 0, 1.0 / sy, 0, 0, 0, 0, 1.0 / sz, 0};
  t(0, 3) = center[0] * (1.0 - 1.0 / sx);
  t(1, 3) = center[1] * (1.0 - 1.0 / sy);
  t(2, 3) = center[2] * (1.0 - 1.0 / sz);
  return t;
}

/// Warp transform that moves image content by (dx, dy, dz) voxels.
[[nodiscard]] inline AffineTransform content_translation(double dx, double dy, double dz) {
  return AffineTransform::translation(-dx, -dy, -dz);
}

/// Per-pixel 2D displacement in pixels; u along x (columns), v along y (rows).
template <typename T>
struct BasicFlowField {
  Dims2 dims{};
  std::vector<T> u = std::vector<T>(1);
  std::vector<T> v = std::vector<T>(1);

  BasicFlowField() = default;
  explicit BasicFlowField(Dims2 d, T u0 = T{}, T v0 = T{})
      : dims(d),
        u(static_cast<std::size_t>(d.count()), u0),
        v(static_cast<std::size_t>(d.count()), v0) {
    if (d.nx < 1 || d.ny < 1) throw InvalidArgument("flow dims must be >= 1");
  }
  BasicFlowField(Dims2 d, std::vector<T> uu, std::vector<T> vv)
      : dims(d), u(std::move(uu)), v(std::move(vv)) {
    validate();
  }

  template <typename U>
  [[nodiscard]] BasicFlowField<U> cast() const {
    return BasicFlowField<U>(dims, std::vector<U>(u.begin(), u.end()), std::vector<U>(v.begin(), v.end()));
  }

  [[nodiscard]] std::int64_t size() const { return dims.count(); }

  void validate() const {
    if (dims.nx < 1 || dims.ny < 1) throw InvalidArgument("flow dims must be >= 1");
    if (static_cast<std::int64_t>(u.size()) != dims.count() ||
        static_cast<std::int64_t>(v.size()) != dims.count()) {
      throw InvalidArgument("flow component length does not match dims " + to_string(dims));
    }
    require_finite(std::span<const T>(u), "flow u");
    require_finite(std::span<const T>(v), "flow v");
  }

  friend bool operator==(const BasicFlowField&, const BasicFlowField&) = default;
};

/// Stored and serialized precision.
using FlowField = BasicFlowField<float>;
/// Working precision inside the optimizer and gradient checks.
using FlowFieldD = BasicFlowField<double>;

inline constexpr float kMaskThreshold = 0.1F;

template <typename T>
[[nodiscard]] Grid3<T> warp_affine(const Grid3<T>& moving, const AffineTransform& t) {
  if (!t.invertible()) throw InvalidArgument("cannot warp with a singular affine transform");
  const Dims3& d = moving.dims();
  Grid3<T> out(d, moving.spacing());
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x) {
        const auto p = t.apply(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
        out(x, y, z) = static_cast<T>(sample_trilinear(moving, p[0], p[1], p[2]));
      }
    }
  }
  return out;
}

/// Output pixel (x, y) = moving(x + u, y + v), bilinear, zero outside.
template <typename T, typename F>
[[nodiscard]] Grid2<T> warp_flow(const Grid2<T>& moving, const BasicFlowField<F>& f) {
  if (!(f.dims == moving.dims())) {
    throw InvalidArgument("flow dims " + to_string(f.dims) + " do not match slice dims " +
                          to_string(moving.dims()));
  }
  Grid2<T> out(moving.dims(), T{}, moving.parent_z());
  for (std::int64_t y = 0; y < moving.ny(); ++y) {
    for (std::int64_t x = 0; x < moving.nx(); ++x) {
      const auto i = moving.index(x, y);
      out[i] = static_cast<T>(sample_bilinear(moving, static_cast<double>(x) + static_cast<double>(f.u[static_cast<std::size_t>(i)]),
                                              static_cast<double>(y) + static_cast<double>(f.v[static_cast<std::size_t>(i)])));
    }
  }
  return out;
}

/// Warps every axial slice z by flows[z].
template <typename T>
[[nodiscard]] Grid3<T> warp_flow_stack(const Grid3<T>& moving, std::span<const FlowField> flows) {
  if (static_cast<std::int64_t>(flows.size()) != moving.dims().nz) {
    throw InvalidArgument("need one flow field per axial slice (" + std::to_string(moving.dims().nz) +
                          "), got " + std::to_string(flows.size()));
  }
  Grid3<T> out(moving.dims(), moving.spacing());
  for (std::int64_t z = 0; z < moving.dims().nz; ++z) {
    insert_slice(out, warp_flow(extract_slice(moving, z), flows[static_cast<std::size_t>(z)]), z);
  }
  return out;
}

[[nodiscard]] inline Volume mask_to_float(const LabelMask& mask) {
  std::vector<float> values(mask.data().begin(), mask.data().end());
  return Volume(mask.dims(), mask.spacing(), std::move(values));
}

/// Binarizes interpolated mask values: >= threshold becomes 1.
[[nodiscard]] inline LabelMask binarize(const Volume& v, float threshold = kMaskThreshold) {
  std::vector<std::uint8_t> values(static_cast<std::size_t>(v.size()));
  for (std::int64_t i = 0; i < v.size(); ++i) {
    values[static_cast<std::size_t>(i)] = v[i] >= threshold ? 1 : 0;
  }
  return LabelMask(v.dims(), v.spacing(), std::move(values));
}

[[nodiscard]] inline LabelMask warp_mask(const LabelMask& mask, const AffineTransform& t) {
  return binarize(warp_affine(mask_to_float(mask), t));
}

[[nodiscard]] inline LabelMask warp_mask(const LabelMask& mask, std::span<const FlowField> flows) {
  return binarize(warp_flow_stack(mask_to_float(mask), flows));
}

/// Affine then per-slice flow, thresholded once at the end.
[[nodiscard]] inline LabelMask warp_mask(const LabelMask& mask, const AffineTransform& t,
                                         std::span<const FlowField> flows) {
  return binarize(warp_flow_stack(warp_affine(mask_to_float(mask), t), flows));
}

}  // namespace regflow
