#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "regflow/error.hpp"
#include "regflow/grid.hpp"
#include "regflow/imaging.hpp"
#include "regflow/interpolate.hpp"
#include "regflow/losses.hpp"
#include "regflow/morphology.hpp"

namespace regflow {

/// Otsu threshold over the 256-bin intensity histogram. Returns the last
/// background bin: voxels with intensity_bin(v) > result are foreground.
template <typename T>
[[nodiscard]] int otsu_bin(const Grid3<T>& v) {
  std::array<double, kHistogramBins> counts{};
  for (const T& x : v.data()) counts[static_cast<std::size_t>(intensity_bin(static_cast<double>(x)))] += 1.0;
  double total = 0.0;
  double weighted = 0.0;
  for (int b = 0; b < kHistogramBins; ++b) {
    total += counts[static_cast<std::size_t>(b)];
    weighted += b * counts[static_cast<std::size_t>(b)];
  }
  double w0 = 0.0;
  double s0 = 0.0;
  double best = -1.0;
  int best_bin = -1;
  for (int t = 0; t < kHistogramBins - 1; ++t) {
    w0 += counts[static_cast<std::size_t>(t)];
    s0 += t * counts[static_cast<std::size_t>(t)];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = s0 / w0;
    const double m1 = (weighted - s0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = t;
    }
  }
  if (best_bin < 0) throw DegenerateInput("otsu: intensities fall into a single bin");
  return best_bin;
}

/// Head mask of one slice: global Otsu threshold, then a 3x3 opening and closing.
template <typename T>
[[nodiscard]] Grid2<std::uint8_t> head_mask_slice(const Grid3<T>& v, std::int64_t z, int threshold_bin) {
  const auto s = extract_slice(v, z);
  Grid2<std::uint8_t> m(s.dims(), 0, z);
  for (std::int64_t i = 0; i < s.size(); ++i) {
    m[i] = intensity_bin(static_cast<double>(s[i])) > threshold_bin ? 1 : 0;
  }
  return close3x3(open3x3(m));
}

struct PrincipalAxis {
  /// Tilt of the major axis from +y, degrees; positive for rotation from x towards y.
  double degrees = 0.0;
  /// Centroid in voxel coordinates.
  double cx = 0.0;
  double cy = 0.0;
  bool degenerate = false;
  std::int64_t pixels = 0;
};

/// PCA of foreground pixel positions (physical units).
[[nodiscard]] inline PrincipalAxis principal_axis(const Grid2<std::uint8_t>& mask, double sx = 1.0, double sy = 1.0) {
  PrincipalAxis out;
  double mx = 0.0;
  double my = 0.0;
  for (std::int64_t y = 0; y < mask.ny(); ++y) {
    for (std::int64_t x = 0; x < mask.nx(); ++x) {
      if (mask(x, y) == 0) continue;
      mx += static_cast<double>(x);
      my += static_cast<double>(y);
      ++out.pixels;
    }
  }
  if (out.pixels == 0) throw DegenerateInput("principal_axis: empty foreground");
  const auto n = static_cast<double>(out.pixels);
  out.cx = mx / n;
  out.cy = my / n;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (std::int64_t y = 0; y < mask.ny(); ++y) {
    for (std::int64_t x = 0; x < mask.nx(); ++x) {
      if (mask(x, y) == 0) continue;
      const double dx = (static_cast<double>(x) - out.cx) * sx;
      const double dy = (static_cast<double>(y) - out.cy) * sy;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  }
  const double half_trace = 0.5 * (sxx + syy);
  const double spread = std::hypot(0.5 * (sxx - syy), sxy);
  if (!(spread > 1e-9 * half_trace)) {
    out.degenerate = true;
    return out;
  }
  const double phi = 0.5 * std::atan2(2.0 * sxy, sxx - syy);
  double ex = std::cos(phi);
  double ey = std::sin(phi);
  if (ey < 0.0 || (ey == 0.0 && ex > 0.0)) {
    ex = -ex;
    ey = -ey;
  }
  out.degrees = std::atan2(-ex, ey) * 180.0 / std::numbers::pi;
  return out;
}

/// Zero-mean normalized cross-correlation between `s` and its mirror image
/// (about the column through (cx, cy)) rotated by `degrees` about (cx, cy).
template <typename T>
[[nodiscard]] double mirror_correlation(const Grid2<T>& s, double cx, double cy, double degrees, double sx = 1.0,
                                        double sy = 1.0) {
  const double rad = -degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double sn = std::sin(rad);
  std::vector<double> moved(static_cast<std::size_t>(s.size()));
  std::size_t i = 0;
  for (std::int64_t y = 0; y < s.ny(); ++y) {
    for (std::int64_t x = 0; x < s.nx(); ++x, ++i) {
      const double px = (static_cast<double>(x) - cx) * sx;
      const double py = (static_cast<double>(y) - cy) * sy;
      const double qx = -(c * px - sn * py);
      const double qy = sn * px + c * py;
      moved[i] = sample_bilinear(s, cx + qx / sx, cy + qy / sy);
    }
  }
  const auto t = correlation_terms(s.data(), std::span<const double>(moved));
  return t.degenerate ? 0.0 : 1.0 - t.loss;
}

struct HeadAngleCandidate {
  std::int64_t slice = 0;
  double coarse = 0.0;   // theta1
  double refined = 0.0;  // theta1 + theta2
  bool degenerate = false;
};

struct HeadAngle {
  double degrees = 0.0;
  std::vector<HeadAngleCandidate> candidates;
  std::vector<std::string> warnings;
};

/// Head rotation about the axial direction. Per slice (every second slice
/// from the middle to the top, skipping slices whose head mask is less than
/// half the largest one): coarse angle from PCA of the head mask; the
/// three slices with the smallest |coarse| are refined by a 0.5 degree sweep
/// of mirror-and-rotate correlation over [-2|coarse|, 2|coarse|]. A mirrored
/// slice matches the original when rotated by twice the head angle, so each
/// refined angle is half the best sweep angle. The result is their mean.
template <typename T>
[[nodiscard]] HeadAngle head_angle_detail(const Grid3<T>& v) {
  constexpr double kStep = 0.5;
  const Dims3& d = v.dims();
  const double sx = v.spacing().x;
  const double sy = v.spacing().y;
  const int threshold = otsu_bin(v);
  std::vector<std::pair<HeadAngleCandidate, PrincipalAxis>> slices;
  for (std::int64_t z = d.nz / 2; z < d.nz; z += 2) {
    const auto mask = head_mask_slice(v, z, threshold);
    if (std::none_of(mask.data().begin(), mask.data().end(), [](std::uint8_t b) { return b != 0; })) continue;
    const auto axis = principal_axis(mask, sx, sy);
    HeadAngleCandidate c;
    c.slice = z;
    c.coarse = axis.degrees;
    c.degenerate = axis.degenerate;
    slices.push_back({c, axis});
  }
  if (slices.empty()) throw DegenerateInput("head_angle: no head foreground in the upper slices");
  // Cross-sections near the top of the head are too small to carry an orientation.
  std::int64_t largest = 0;
  for (const auto& s : slices) largest = std::max(largest, s.second.pixels);
  std::erase_if(slices, [&](const auto& s) { return 2 * s.second.pixels < largest; });
  std::stable_sort(slices.begin(), slices.end(), [](const auto& a, const auto& b) {
    return std::abs(a.first.coarse) < std::abs(b.first.coarse);
  });
  slices.resize(std::min<std::size_t>(slices.size(), 3));

  HeadAngle out;
  double sum = 0.0;
  for (auto& [cand, axis] : slices) {
    if (cand.degenerate) {
      out.warnings.push_back("slice " + std::to_string(cand.slice) + ": isotropic head mask, angle set to 0");
    }
    const auto s = extract_slice(v, cand.slice);
    const int steps = static_cast<int>(std::ceil(2.0 * std::abs(cand.coarse) / kStep - 1e-9));
    double best_score = -2.0;
    double best_phi = 0.0;
    for (int k = -steps; k <= steps; ++k) {
      const double phi = kStep * k;
      const double score = mirror_correlation(s, axis.cx, axis.cy, phi, sx, sy);
      if (score > best_score || (score == best_score && std::abs(phi) < std::abs(best_phi))) {
        best_score = score;
        best_phi = phi;
      }
    }
    cand.refined = 0.5 * best_phi;
    sum += cand.refined;
    out.candidates.push_back(cand);
  }
  out.degrees = sum / static_cast<double>(out.candidates.size());
  return out;
}

template <typename T>
[[nodiscard]] double head_angle(const Grid3<T>& v) {
  return head_angle_detail(v).degrees;
}

}  // namespace regflow
