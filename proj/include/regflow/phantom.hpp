#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "regflow/grid.hpp"
#include "regflow/resample.hpp"

namespace regflow {

/// Axis-aligned ellipsoid; center is in mm relative to the grid center.
struct Ellipsoid {
  std::array<double, 3> center{};
  std::array<double, 3> semi_axes{1, 1, 1};

  [[nodiscard]] bool contains(const std::array<double, 3>& p) const {
    double s = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      const double d = (p[k] - center[k]) / semi_axes[k];
      s += d * d;
    }
    return s <= 1.0;
  }
};

struct LesionBlob {
  std::array<double, 3> center{};  // mm relative to grid center
  double radius = 2.0;             // mm
  double intensity = 0.85;
};

struct TissueIntensities {
  double background = 0.0;
  double brain = 0.45;
  double ventricle = 0.15;
  double wml = 0.85;
};

/// Synthetic FLAIR-like head: a brain ellipsoid, two ventricles placed
/// symmetrically about the midline, and bright lesion blobs.
struct PhantomSpec {
  Dims3 dims{64, 64, 16};
  Spacing3 spacing{1.0, 1.0, 1.0};
  Ellipsoid head{};
  std::array<Ellipsoid, 2> ventricles{};
  std::vector<LesionBlob> wml;
  TissueIntensities intensity{};
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  /// Proportions scaled to the physical extent of `dims` x `spacing`; `lesions`
  /// blobs are placed pseudo-randomly from `seed` inside the brain.
  [[nodiscard]] static PhantomSpec standard(Dims3 dims, Spacing3 spacing = {}, int lesions = 4,
                                            std::uint64_t seed = 0) {
    PhantomSpec s;
    s.dims = dims;
    s.spacing = spacing;
    s.seed = seed;
    const std::array<double, 3> ext{static_cast<double>(dims.nx) * spacing.x,
                                    static_cast<double>(dims.ny) * spacing.y,
                                    static_cast<double>(dims.nz) * spacing.z};
    s.head.center = {0, 0, 0};
    s.head.semi_axes = {0.34 * ext[0], 0.42 * ext[1], 0.42 * ext[2]};
    for (int side = 0; side < 2; ++side) {
      const double sign = side == 0 ? -1.0 : 1.0;
      s.ventricles[static_cast<std::size_t>(side)].center = {sign * 0.07 * ext[0], -0.03 * ext[1], 0.04 * ext[2]};
      s.ventricles[static_cast<std::size_t>(side)].semi_axes = {0.045 * ext[0], 0.14 * ext[1], 0.16 * ext[2]};
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double radius = std::max(0.03 * ext[0], 1.6 * std::max(spacing.x, spacing.y));
    int placed = 0;
    for (int attempt = 0; placed < lesions && attempt < 1000 * (lesions + 1); ++attempt) {
      LesionBlob b;
      b.radius = radius;
      for (std::size_t k = 0; k < 3; ++k) b.center[k] = 0.6 * unit(rng) * s.head.semi_axes[k];
      if (s.blob_placement_ok(b)) {
        s.wml.push_back(b);
        ++placed;
      }
    }
    return s;
  }

  /// Same as standard() but without lesions: mirror-symmetric about the midline.
  [[nodiscard]] static PhantomSpec symmetric(Dims3 dims, Spacing3 spacing = {}) {
    return standard(dims, spacing, 0, 0);
  }

  [[nodiscard]] bool blob_placement_ok(const LesionBlob& b) const {
    Ellipsoid inner = head;
    for (std::size_t k = 0; k < 3; ++k) inner.semi_axes[k] = std::max(head.semi_axes[k] - 1.5 * b.radius, 0.0);
    if (!inner.contains(b.center)) return false;
    for (const auto& v : ventricles) {
      Ellipsoid grown = v;
      for (std::size_t k = 0; k < 3; ++k) grown.semi_axes[k] += 1.5 * b.radius;
      if (grown.contains(b.center)) return false;
    }
    return true;
  }
};

/// A second "subject": standard() anatomy with the head semi-axes scaled in x
/// and y, ventricles scaled in-plane, and lesions drawn from another seed.
/// Lesions that no longer fit inside the scaled head are dropped.
[[nodiscard]] inline PhantomSpec phantom_subject(Dims3 dims, Spacing3 spacing, double head_scale_x, double head_scale_y,
                                                 double ventricle_scale, std::uint64_t seed, int lesions = 4) {
  PhantomSpec s = PhantomSpec::standard(dims, spacing, lesions, seed);
  s.head.semi_axes[0] *= head_scale_x;
  s.head.semi_axes[1] *= head_scale_y;
  for (auto& v : s.ventricles) {
    v.semi_axes[0] *= ventricle_scale;
    v.semi_axes[1] *= ventricle_scale;
  }
  std::erase_if(s.wml, [&](const LesionBlob& b) { return !s.blob_placement_ok(b); });
  return s;
}

struct PhantomImages {
  Volume volume;
  LabelMask brain;
  LabelMask ventricles;
  LabelMask wml;
};

/// Renders the phantom. Tissue priority: lesion > ventricle > brain; every
/// structure mask is a subset of the brain mask.
[[nodiscard]] inline PhantomImages make_phantom(const PhantomSpec& spec) {
  const Dims3 d = spec.dims;
  const Spacing3 sp = spec.spacing;
  const auto c = grid_center(d);
  for (double v : {spec.intensity.background, spec.intensity.brain, spec.intensity.ventricle, spec.intensity.wml}) {
    if (!(v >= 0.0 && v <= 1.0)) throw InvalidArgument("phantom intensities must lie in [0, 1]");
  }
  const std::array<double, 3> half_extent{c[0] * sp.x, c[1] * sp.y, c[2] * sp.z};
  for (std::size_t k = 0; k < 3; ++k) {
    if (std::abs(spec.head.center[k]) + spec.head.semi_axes[k] > half_extent[k] + 1e-9) {
      throw InvalidArgument("phantom head ellipsoid extends outside the grid");
    }
  }

  PhantomImages out{Volume(d, sp), LabelMask(d, sp), LabelMask(d, sp), LabelMask(d, sp)};
  std::int64_t outside = 0;
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x) {
        const std::array<double, 3> p{(static_cast<double>(x) - c[0]) * sp.x, (static_cast<double>(y) - c[1]) * sp.y,
                                      (static_cast<double>(z) - c[2]) * sp.z};
        const bool in_brain = spec.head.contains(p);
        bool in_vent = false;
        for (const auto& v : spec.ventricles) in_vent = in_vent || v.contains(p);
        const LesionBlob* blob = nullptr;
        for (const auto& b : spec.wml) {
          const double dx = p[0] - b.center[0];
          const double dy = p[1] - b.center[1];
          const double dz = p[2] - b.center[2];
          if (dx * dx + dy * dy + dz * dz <= b.radius * b.radius) blob = &b;
        }
        double value = spec.intensity.background;
        if (in_brain) {
          out.brain(x, y, z) = 1;
          value = spec.intensity.brain;
          if (blob != nullptr) {
            out.wml(x, y, z) = 1;
            value = blob->intensity;
          } else if (in_vent) {
            out.ventricles(x, y, z) = 1;
            value = spec.intensity.ventricle;
          }
        } else if (in_vent || blob != nullptr) {
          ++outside;
        }
        out.volume(x, y, z) = static_cast<float>(value);
      }
    }
  }
  if (outside > 0) {
    throw InvalidArgument("phantom structures extend outside the head (" + std::to_string(outside) + " voxels)");
  }
  if (spec.noise_sigma > 0.0) {
    std::mt19937_64 rng(spec.seed ^ 0x9E3779B97F4A7C15ULL);
    std::normal_distribution<double> noise(0.0, spec.noise_sigma);
    for (auto& v : out.volume.data()) {
      v = static_cast<float>(std::clamp(static_cast<double>(v) + noise(rng), 0.0, 1.0));
    }
  }
  return out;
}

struct TransformedPhantom {
  PhantomImages images;
  /// Ground-truth warp: images = warp(original, truth).
  AffineTransform truth;
};

/// Warps the volume (trilinear) and every mask (thresholded at 0.1) by `t`.
[[nodiscard]] inline TransformedPhantom apply_known_transform(const PhantomImages& p, const AffineTransform& t) {
  return {{warp_affine(p.volume, t), warp_mask(p.brain, t), warp_mask(p.ventricles, t), warp_mask(p.wml, t)}, t};
}

}  // namespace regflow
