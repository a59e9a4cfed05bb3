#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "regflow/error.hpp"
#include "regflow/grid.hpp"
#include "regflow/imaging.hpp"
#include "regflow/losses.hpp"
#include "regflow/morphology.hpp"

namespace regflow {

namespace detail {

template <typename A, typename B>
void require_same_grid(const Grid3<A>& a, const Grid3<B>& b, const char* what) {
  if (!(a.dims() == b.dims())) {
    throw InvalidArgument(std::string(what) + ": grids differ (" + to_string(a.dims()) + " vs " +
                          to_string(b.dims()) + ")");
  }
}

inline std::int64_t count_nonzero(const LabelMask& m) {
  return std::count_if(m.data().begin(), m.data().end(), [](std::uint8_t v) { return v != 0; });
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Structural integrity.

/// Voxel count times voxel volume, in mm^3.
[[nodiscard]] inline double structure_volume(const LabelMask& m) {
  return static_cast<double>(detail::count_nonzero(m)) * m.spacing().voxel_volume();
}

/// vol(s) / vol(b).
[[nodiscard]] inline double proportional_volume(const LabelMask& s, const LabelMask& b) {
  const double vb = structure_volume(b);
  if (!(vb > 0.0)) throw DegenerateInput("proportional_volume: brain mask is empty");
  return structure_volume(s) / vb;
}

/// PV before registration minus PV after; negative when the structure grew
/// relative to the brain.
[[nodiscard]] inline double delta_pv(const LabelMask& orig_s, const LabelMask& orig_b, const LabelMask& reg_s,
                                     const LabelMask& reg_b) {
  return proportional_volume(orig_s, orig_b) - proportional_volume(reg_s, reg_b);
}

/// vol(orig) / vol(reg): > 1 means the structure shrank.
[[nodiscard]] inline double volume_ratio(const LabelMask& orig, const LabelMask& reg) {
  const double vr = structure_volume(reg);
  if (!(vr > 0.0)) throw DegenerateInput("volume_ratio: registered mask is empty");
  return structure_volume(orig) / vr;
}

/// Mean, over the structure's boundary voxels, of the physical distance (mm)
/// to the nearest brain-boundary voxel.
[[nodiscard]] inline double ssd(const LabelMask& structure, const LabelMask& brain) {
  detail::require_same_grid(structure, brain, "ssd");
  const auto sb = boundary6(structure);
  const auto bb = boundary6(brain);
  if (detail::count_nonzero(sb) == 0) throw DegenerateInput("ssd: structure boundary is empty");
  if (detail::count_nonzero(bb) == 0) throw DegenerateInput("ssd: brain boundary is empty");
  const auto dist2 = squared_distance_transform(bb);
  double sum = 0.0;
  std::int64_t n = 0;
  for (std::int64_t i = 0; i < sb.size(); ++i) {
    if (sb[i] == 0) continue;
    sum += std::sqrt(dist2[i]);
    ++n;
  }
  return sum / static_cast<double>(n);
}

/// (orig - reg) / orig.
[[nodiscard]] inline double delta_ssd(double orig_ssd, double reg_ssd) {
  if (orig_ssd == 0.0) throw DegenerateInput("delta_ssd: original SSD is zero");
  return (orig_ssd - reg_ssd) / orig_ssd;
}

// ---------------------------------------------------------------------------
// Spatial alignment.

struct PwaResult {
  /// One value per axial slice.
  std::vector<double> per_slice;
  /// Mean over slices.
  double total = 0.0;
};

/// Per-slice mean squared error against the fixed volume, averaged over
/// pixels and over the registered volumes.
[[nodiscard]] inline PwaResult pwa(std::span<const Volume> registered, const Volume& fixed) {
  if (registered.empty()) throw InvalidArgument("pwa: no registered volumes");
  const Dims3& d = fixed.dims();
  for (const auto& v : registered) detail::require_same_grid(v, fixed, "pwa");
  const std::int64_t plane = d.nx * d.ny;
  PwaResult out;
  out.per_slice.assign(static_cast<std::size_t>(d.nz), 0.0);
  for (std::int64_t z = 0; z < d.nz; ++z) {
    double sum = 0.0;
    for (const auto& v : registered) {
      for (std::int64_t i = plane * z; i < plane * (z + 1); ++i) {
        const double e = static_cast<double>(v[i]) - static_cast<double>(fixed[i]);
        sum += e * e;
      }
    }
    out.per_slice[static_cast<std::size_t>(z)] =
        sum / (static_cast<double>(registered.size()) * static_cast<double>(plane));
  }
  double total = 0.0;
  for (double p : out.per_slice) total += p;
  out.total = total / static_cast<double>(d.nz);
  return out;
}

[[nodiscard]] inline PwaResult pwa(const Volume& registered, const Volume& fixed) {
  return pwa(std::span<const Volume>(&registered, 1), fixed);
}

/// Dice overlap 2|A & B| / (|A| + |B|).
[[nodiscard]] inline double dsc(const LabelMask& a, const LabelMask& b) {
  detail::require_same_grid(a, b, "dsc");
  std::int64_t na = 0;
  std::int64_t nb = 0;
  std::int64_t both = 0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const bool x = a[i] != 0;
    const bool y = b[i] != 0;
    na += x ? 1 : 0;
    nb += y ? 1 : 0;
    both += (x && y) ? 1 : 0;
  }
  if (na + nb == 0) throw DegenerateInput("dsc: both masks are empty");
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

// ---------------------------------------------------------------------------
// Intensity similarity.

/// Mutual information (bits) of the 256 x 256 joint intensity histogram.
template <typename T>
[[nodiscard]] double mutual_information(const Grid3<T>& m, const Grid3<T>& f) {
  detail::require_same_grid(m, f, "mutual_information");
  constexpr auto kBins = static_cast<std::size_t>(kHistogramBins);
  std::vector<double> joint(kBins * kBins, 0.0);
  std::array<double, kBins> pm{};
  std::array<double, kBins> pf{};
  for (std::int64_t i = 0; i < m.size(); ++i) {
    const auto a = static_cast<std::size_t>(intensity_bin(static_cast<double>(m[i])));
    const auto b = static_cast<std::size_t>(intensity_bin(static_cast<double>(f[i])));
    joint[a * kBins + b] += 1.0;
    pm[a] += 1.0;
    pf[b] += 1.0;
  }
  const auto n = static_cast<double>(m.size());
  double mi = 0.0;
  for (std::size_t a = 0; a < kBins; ++a) {
    if (pm[a] == 0.0) continue;
    for (std::size_t b = 0; b < kBins; ++b) {
      const double c = joint[a * kBins + b];
      if (c == 0.0) continue;
      mi += (c / n) * std::log2(c * n / (pm[a] * pf[b]));
    }
  }
  return std::max(mi, 0.0);
}

/// Pearson correlation of voxel intensities.
template <typename T>
[[nodiscard]] double pearson_r(const Grid3<T>& m, const Grid3<T>& f) {
  detail::require_same_grid(m, f, "pearson_r");
  const auto t = correlation_terms(m.data(), f.data());
  if (t.degenerate) throw DegenerateInput("pearson_r: an input has zero variance");
  return 1.0 - t.loss;
}

/// Voxel-wise mean of the registered volumes.
[[nodiscard]] inline Volume build_atlas(std::span<const Volume> registered) {
  if (registered.empty()) throw InvalidArgument("build_atlas: no volumes");
  const Volume& first = registered.front();
  for (const auto& v : registered) detail::require_same_grid(v, first, "build_atlas");
  std::vector<double> sum(static_cast<std::size_t>(first.size()), 0.0);
  for (const auto& v : registered) {
    for (std::int64_t i = 0; i < v.size(); ++i) sum[static_cast<std::size_t>(i)] += static_cast<double>(v[i]);
  }
  Volume out(first.dims(), first.spacing());
  const auto n = static_cast<double>(registered.size());
  for (std::int64_t i = 0; i < out.size(); ++i) out[i] = static_cast<float>(sum[static_cast<std::size_t>(i)] / n);
  return out;
}

/// Mean absolute difference of the normalized 256-bin histograms, after
/// zeroing bins below `nulled_low_bins` in both.
template <typename T>
[[nodiscard]] double maid(const Grid3<T>& a, const Grid3<T>& f, int nulled_low_bins = 0) {
  const auto ha = histogram(a, nulled_low_bins);
  const auto hf = histogram(f, nulled_low_bins);
  double sum = 0.0;
  for (std::size_t i = 0; i < ha.bins.size(); ++i) sum += std::abs(ha.bins[i] - hf.bins[i]);
  return sum / static_cast<double>(kHistogramBins);
}

/// Voxel-wise mean of binary masks, in [0, 1].
[[nodiscard]] inline Volume brain_heatmap(std::span<const LabelMask> masks) {
  if (masks.empty()) throw InvalidArgument("brain_heatmap: no masks");
  const LabelMask& first = masks.front();
  for (const auto& m : masks) detail::require_same_grid(m, first, "brain_heatmap");
  std::vector<std::int64_t> count(static_cast<std::size_t>(first.size()), 0);
  for (const auto& m : masks) {
    for (std::int64_t i = 0; i < m.size(); ++i) count[static_cast<std::size_t>(i)] += m[i] != 0 ? 1 : 0;
  }
  Volume out(first.dims(), first.spacing());
  const auto n = static_cast<double>(masks.size());
  for (std::int64_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(static_cast<double>(count[static_cast<std::size_t>(i)]) / n);
  }
  return out;
}

}  // namespace regflow
