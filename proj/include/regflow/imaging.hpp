#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "regflow/grid.hpp"

namespace regflow {

inline constexpr int kHistogramBins = 256;
/// Bins [0, 21) are treated as background for the zero-padded MAID variant.
inline constexpr int kBackgroundBins = 21;

struct Histogram {
  std::array<double, kHistogramBins> bins{};
  bool normalized = false;

  [[nodiscard]] double mass() const { return std::accumulate(bins.begin(), bins.end(), 0.0); }
};

/// Bin of an intensity in [0,1]; values outside are clamped.
[[nodiscard]] inline int intensity_bin(double v) {
  if (!(v > 0.0)) return 0;
  if (v >= 1.0) return kHistogramBins - 1;
  return std::min(kHistogramBins - 1, static_cast<int>(v * kHistogramBins));
}

/// Normalized 256-bin histogram over [0,1]. Bins below nulled_low_bins are
/// zeroed before normalization.
template <typename T>
[[nodiscard]] Histogram histogram(const Grid3<T>& v, int nulled_low_bins = 0) {
  if (nulled_low_bins < 0 || nulled_low_bins > kHistogramBins) {
    throw InvalidArgument("nulled_low_bins must lie in [0, 256]");
  }
  Histogram h;
  for (const T& value : v.data()) {
    h.bins[static_cast<std::size_t>(intensity_bin(static_cast<double>(value)))] += 1.0;
  }
  for (int b = 0; b < nulled_low_bins; ++b) h.bins[static_cast<std::size_t>(b)] = 0.0;
  const double total = h.mass();
  if (total <= 0.0) {
    throw DegenerateInput("histogram is empty after nulling " + std::to_string(nulled_low_bins) +
                          " low bins");
  }
  for (auto& b : h.bins) b /= total;
  h.normalized = true;
  return h;
}

namespace detail {

struct LinearTap {
  std::int64_t i0 = 0;
  std::int64_t i1 = 0;
  double w1 = 0.0;
};

// Corner-aligned sample positions: first and last samples map onto each other.
inline std::vector<LinearTap> resize_taps(std::int64_t n_in, std::int64_t n_out) {
  std::vector<LinearTap> taps(static_cast<std::size_t>(n_out));
  for (std::int64_t i = 0; i < n_out; ++i) {
    double src = n_out == 1 ? 0.5 * static_cast<double>(n_in - 1)
                            : static_cast<double>(i) * static_cast<double>(n_in - 1) /
                                  static_cast<double>(n_out - 1);
    auto i0 = static_cast<std::int64_t>(std::floor(src));
    i0 = std::clamp<std::int64_t>(i0, 0, n_in - 1);
    const std::int64_t i1 = std::min(i0 + 1, n_in - 1);
    taps[static_cast<std::size_t>(i)] = {i0, i1, src - static_cast<double>(i0)};
  }
  return taps;
}

}  // namespace detail

/// Separable linear (trilinear) resize. Spacing is scaled by n_in / n_out per axis.
template <typename T>
[[nodiscard]] Grid3<T> resize_volume(const Grid3<T>& v, Dims3 target) {
  if (target.nx < 1 || target.ny < 1 || target.nz < 1) {
    throw InvalidArgument("resize target must be >= 1 per axis, got " + to_string(target));
  }
  const Dims3 d = v.dims();
  const Spacing3 s = v.spacing();
  const Spacing3 out_spacing{s.x * static_cast<double>(d.nx) / static_cast<double>(target.nx),
                             s.y * static_cast<double>(d.ny) / static_cast<double>(target.ny),
                             s.z * static_cast<double>(d.nz) / static_cast<double>(target.nz)};
  if (target == d) return Grid3<T>(d, out_spacing, v.values());

  const auto tx = detail::resize_taps(d.nx, target.nx);
  const auto ty = detail::resize_taps(d.ny, target.ny);
  const auto tz = detail::resize_taps(d.nz, target.nz);
  Grid3<T> out(target, out_spacing);
  for (std::int64_t z = 0; z < target.nz; ++z) {
    const auto& cz = tz[static_cast<std::size_t>(z)];
    for (std::int64_t y = 0; y < target.ny; ++y) {
      const auto& cy = ty[static_cast<std::size_t>(y)];
      for (std::int64_t x = 0; x < target.nx; ++x) {
        const auto& cx = tx[static_cast<std::size_t>(x)];
        auto lerp_x = [&](std::int64_t yy, std::int64_t zz) {
          return (1.0 - cx.w1) * static_cast<double>(v(cx.i0, yy, zz)) +
                 cx.w1 * static_cast<double>(v(cx.i1, yy, zz));
        };
        const double y0 = (1.0 - cy.w1) * lerp_x(cy.i0, cz.i0) + cy.w1 * lerp_x(cy.i1, cz.i0);
        const double y1 = (1.0 - cy.w1) * lerp_x(cy.i0, cz.i1) + cy.w1 * lerp_x(cy.i1, cz.i1);
        out(x, y, z) = static_cast<T>((1.0 - cz.w1) * y0 + cz.w1 * y1);
      }
    }
  }
  return out;
}

/// 2x box-average downsampling of a slice with even dims.
template <typename T>
[[nodiscard]] Grid2<T> downsample2(const Grid2<T>& s) {
  if (s.nx() % 2 != 0 || s.ny() % 2 != 0) {
    throw InvalidArgument("downsample2 needs even dims, got " + to_string(s.dims()));
  }
  Grid2<T> out({s.nx() / 2, s.ny() / 2}, T{}, s.parent_z());
  for (std::int64_t y = 0; y < out.ny(); ++y) {
    for (std::int64_t x = 0; x < out.nx(); ++x) {
      const double sum = static_cast<double>(s(2 * x, 2 * y)) + static_cast<double>(s(2 * x + 1, 2 * y)) +
                         static_cast<double>(s(2 * x, 2 * y + 1)) +
                         static_cast<double>(s(2 * x + 1, 2 * y + 1));
      out(x, y) = static_cast<T>(0.25 * sum);
    }
  }
  return out;
}

template <typename T>
[[nodiscard]] std::pair<double, double> min_max(std::span<const T> values) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const T& v : values) {
    lo = std::min(lo, static_cast<double>(v));
    hi = std::max(hi, static_cast<double>(v));
  }
  return {lo, hi};
}

template <typename T>
[[nodiscard]] bool is_constant(std::span<const T> values) {
  if (values.empty()) return true;
  const auto [lo, hi] = min_max(values);
  return lo == hi;
}

}  // namespace regflow
