#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "regflow/error.hpp"
#include "regflow/grid.hpp"

namespace regflow {

/// Mask voxels with at least one 6-neighbour outside the mask; voxels outside
/// the grid count as background. Equivalent to mask minus its 6-connected erosion.
[[nodiscard]] inline LabelMask boundary6(const LabelMask& m) {
  const Dims3& d = m.dims();
  LabelMask out(d, m.spacing());
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x) {
        if (m(x, y, z) == 0) continue;
        const bool interior = m.at_or_zero(x - 1, y, z) != 0 && m.at_or_zero(x + 1, y, z) != 0 &&
                              m.at_or_zero(x, y - 1, z) != 0 && m.at_or_zero(x, y + 1, z) != 0 &&
                              m.at_or_zero(x, y, z - 1) != 0 && m.at_or_zero(x, y, z + 1) != 0;
        if (!interior) out(x, y, z) = 1;
      }
    }
  }
  return out;
}

namespace detail {

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) along one line,
// with squared sample distance `w`. Infinite sites are skipped.
inline void edt_line(std::vector<double>& f, double w, std::vector<std::int64_t>& v, std::vector<double>& z,
                     std::vector<double>& out) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  const auto n = static_cast<std::int64_t>(f.size());
  std::int64_t k = -1;
  for (std::int64_t q = 0; q < n; ++q) {
    const double fq = f[static_cast<std::size_t>(q)];
    if (fq == inf) continue;
    const auto qd = static_cast<double>(q);
    while (true) {
      if (k < 0) {
        ++k;
        v[0] = q;
        z[0] = -inf;
        break;
      }
      const std::int64_t p = v[static_cast<std::size_t>(k)];
      const auto pd = static_cast<double>(p);
      const double s = ((fq + w * qd * qd) - (f[static_cast<std::size_t>(p)] + w * pd * pd)) / (2.0 * w * (qd - pd));
      if (s <= z[static_cast<std::size_t>(k)]) {
        --k;
        continue;
      }
      ++k;
      v[static_cast<std::size_t>(k)] = q;
      z[static_cast<std::size_t>(k)] = s;
      break;
    }
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), inf);
    return;
  }
  z[static_cast<std::size_t>(k + 1)] = inf;
  std::int64_t j = 0;
  for (std::int64_t q = 0; q < n; ++q) {
    const auto qd = static_cast<double>(q);
    while (z[static_cast<std::size_t>(j + 1)] < qd) ++j;
    const std::int64_t p = v[static_cast<std::size_t>(j)];
    const double dq = qd - static_cast<double>(p);
    out[static_cast<std::size_t>(q)] = f[static_cast<std::size_t>(p)] + w * dq * dq;
  }
}

}  // namespace detail

/// Exact squared Euclidean distance (mm^2, using the grid spacing) from every
/// voxel to the nearest nonzero voxel of `sites`. Infinity when `sites` is empty.
[[nodiscard]] inline Grid3<double> squared_distance_transform(const LabelMask& sites) {
  const Dims3& d = sites.dims();
  const Spacing3& sp = sites.spacing();
  Grid3<double> dist(d, sp, std::numeric_limits<double>::infinity());
  for (std::int64_t i = 0; i < sites.size(); ++i) {
    if (sites[i] != 0) dist[i] = 0.0;
  }
  const std::int64_t longest = std::max({d.nx, d.ny, d.nz});
  std::vector<double> f;
  std::vector<double> out;
  std::vector<std::int64_t> v(static_cast<std::size_t>(longest));
  std::vector<double> z(static_cast<std::size_t>(longest + 1));

  auto pass = [&](std::int64_t n, std::int64_t stride, double w, std::int64_t lines,
                  auto&& line_start) {
    f.resize(static_cast<std::size_t>(n));
    out.resize(static_cast<std::size_t>(n));
    for (std::int64_t l = 0; l < lines; ++l) {
      const std::int64_t base = line_start(l);
      for (std::int64_t q = 0; q < n; ++q) f[static_cast<std::size_t>(q)] = dist[base + q * stride];
      detail::edt_line(f, w, v, z, out);
      for (std::int64_t q = 0; q < n; ++q) dist[base + q * stride] = out[static_cast<std::size_t>(q)];
    }
  };
  pass(d.nx, 1, sp.x * sp.x, d.ny * d.nz, [&](std::int64_t l) { return l * d.nx; });
  pass(d.ny, d.nx, sp.y * sp.y, d.nx * d.nz,
       [&](std::int64_t l) { return (l % d.nx) + (l / d.nx) * d.nx * d.ny; });
  pass(d.nz, d.nx * d.ny, sp.z * sp.z, d.nx * d.ny, [&](std::int64_t l) { return l; });
  return dist;
}

/// Binary erosion / dilation of a 2D mask with a 3x3 square; pixels outside
/// the slice count as background.
[[nodiscard]] inline Grid2<std::uint8_t> erode3x3(const Grid2<std::uint8_t>& m) {
  Grid2<std::uint8_t> out(m.dims(), 0, m.parent_z());
  for (std::int64_t y = 0; y < m.ny(); ++y) {
    for (std::int64_t x = 0; x < m.nx(); ++x) {
      bool all = true;
      for (std::int64_t dy = -1; dy <= 1 && all; ++dy) {
        for (std::int64_t dx = -1; dx <= 1 && all; ++dx) all = m.at_or_zero(x + dx, y + dy) != 0;
      }
      out(x, y) = all ? 1 : 0;
    }
  }
  return out;
}

[[nodiscard]] inline Grid2<std::uint8_t> dilate3x3(const Grid2<std::uint8_t>& m) {
  Grid2<std::uint8_t> out(m.dims(), 0, m.parent_z());
  for (std::int64_t y = 0; y < m.ny(); ++y) {
    for (std::int64_t x = 0; x < m.nx(); ++x) {
      bool any = false;
      for (std::int64_t dy = -1; dy <= 1 && !any; ++dy) {
        for (std::int64_t dx = -1; dx <= 1 && !any; ++dx) any = m.at_or_zero(x + dx, y + dy) != 0;
      }
      out(x, y) = any ? 1 : 0;
    }
  }
  return out;
}

[[nodiscard]] inline Grid2<std::uint8_t> open3x3(const Grid2<std::uint8_t>& m) { return dilate3x3(erode3x3(m)); }
[[nodiscard]] inline Grid2<std::uint8_t> close3x3(const Grid2<std::uint8_t>& m) { return erode3x3(dilate3x3(m)); }

}  // namespace regflow
