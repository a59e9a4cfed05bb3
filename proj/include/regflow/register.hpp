#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "regflow/error.hpp"
#include "regflow/grid.hpp"
#include "regflow/imaging.hpp"
#include "regflow/losses.hpp"
#include "regflow/optimizer.hpp"
#include "regflow/parallel.hpp"
#include "regflow/resample.hpp"

namespace regflow {

// ---------------------------------------------------------------------------
// Affine stage.

/// Maps the 12 optimizer parameters to a voxel-space transform. Parameters
/// live in a centered frame scaled to [-1, 1] per axis (the spatial
/// transformer convention), so every entry moves voxels by a comparable amount.
class NormalizedAffineFrame {
 public:
  explicit NormalizedAffineFrame(const Dims3& d) : center_(grid_center(d)) {
    half_ = {std::max(center_[0], 0.5), std::max(center_[1], 0.5), std::max(center_[2], 0.5)};
  }

  [[nodiscard]] AffineTransform to_voxel(const std::array<double, 12>& p) const {
    AffineTransform t;
    for (int r = 0; r < 3; ++r) {
      double shift = center_[r] + half_[r] * p[static_cast<std::size_t>(4 * r + 3)];
      for (int k = 0; k < 3; ++k) {
        const double a = half_[r] * p[static_cast<std::size_t>(4 * r + k)] / half_[k];
        t(r, k) = a;
        shift -= a * center_[k];
      }
      t(r, 3) = shift;
    }
    return t;
  }

  [[nodiscard]] std::array<double, 12> from_voxel(const AffineTransform& t) const {
    std::array<double, 12> p{};
    for (int r = 0; r < 3; ++r) {
      double shift = t(r, 3) - center_[r];
      for (int k = 0; k < 3; ++k) {
        p[static_cast<std::size_t>(4 * r + k)] = t(r, k) * half_[k] / half_[r];
        shift += t(r, k) * center_[k];
      }
      p[static_cast<std::size_t>(4 * r + 3)] = shift / half_[r];
    }
    return p;
  }

  /// Chain rule from d loss / d voxel-matrix entries to d loss / d parameters.
  [[nodiscard]] std::array<double, 12> pull_back(const std::array<double, 12>& g) const {
    std::array<double, 12> out{};
    for (int r = 0; r < 3; ++r) {
      const double gt = g[static_cast<std::size_t>(4 * r + 3)];
      for (int k = 0; k < 3; ++k) {
        out[static_cast<std::size_t>(4 * r + k)] =
            (g[static_cast<std::size_t>(4 * r + k)] - gt * center_[k]) * half_[r] / half_[k];
      }
      out[static_cast<std::size_t>(4 * r + 3)] = gt * half_[r];
    }
    return out;
  }

 private:
  std::array<double, 3> center_{};
  std::array<double, 3> half_{};
};

struct AffineResult {
  AffineTransform transform;
  double loss = 0.0;
  std::int64_t iterations = 0;
  std::vector<TraceEntry> trace;
};

/// Minimizes corr_loss_3d(fixed, warp_affine(moving, A)) over the 12 entries
/// of A by Adam, starting at the identity. Returns the best transform seen.
template <typename T>
[[nodiscard]] AffineResult register_affine(const Grid3<T>& moving, const Grid3<T>& fixed,
                                           const OptimizerConfig& cfg = affine_defaults()) {
  cfg.validate();
  if (!(moving.dims() == fixed.dims())) {
    throw InvalidArgument("register_affine: moving " + to_string(moving.dims()) + " and fixed " +
                          to_string(fixed.dims()) + " differ; resize first");
  }
  if (is_constant(moving.data()) || is_constant(fixed.data())) {
    throw DegenerateInput("register_affine: moving and fixed volumes must be non-constant");
  }
  const NormalizedAffineFrame frame(moving.dims());
  auto params = frame.from_voxel(AffineTransform::identity());
  Adam adam(params.size(), cfg);
  BestTracker tracker(cfg);
  AffineResult result;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const auto t = frame.to_voxel(params);
    AffineLoss eval;
    try {
      eval = corr_loss_3d_affine(fixed, moving, t);
    } catch (const DegenerateInput&) {
      throw DivergenceError("register_affine: warped volume became constant at iteration " + std::to_string(it));
    }
    if (!std::isfinite(eval.loss)) {
      throw DivergenceError("register_affine: non-finite loss at iteration " + std::to_string(it));
    }
    if (tracker.update(eval.loss)) {
      result.transform = t;
      result.loss = eval.loss;
    }
    result.trace.push_back({it, 0, eval.loss, tracker.best()});
    result.iterations = it + 1;
    if (tracker.converged()) break;
    const auto g = frame.pull_back(eval.grad);
    adam.step(params, g);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Flow stage.

/// Mean over pixels of sqrt(u^2 + v^2).
template <typename F>
[[nodiscard]] double average_flow_magnitude(const BasicFlowField<F>& flow) {
  double sum = 0.0;
  for (std::size_t i = 0; i < flow.u.size(); ++i) {
    sum += std::hypot(static_cast<double>(flow.u[i]), static_cast<double>(flow.v[i]));
  }
  return sum / static_cast<double>(flow.u.size());
}

struct FlowResult {
  FlowField flow;
  /// Components of the total loss at the returned flow (finest level).
  TotalLoss final_loss;
  std::vector<TraceEntry> trace;
  /// Pyramid levels at which the correlation term was degenerate at least once.
  std::vector<int> degenerate_levels;
};

namespace detail {

// Flow parameterization used by register_flow: the flow at chain level k is
// the upsampled flow of level k-1 plus an increment c_k. Level 0 is a single
// pixel, i.e. a global translation. Gradients flow back through the adjoint
// of the upsampling, so coarse increments move whole regions coherently.
class FlowHierarchy {
 public:
  explicit FlowHierarchy(const Pyramid& pyr) {
    sizes_.push_back(1);
    for (auto s : pyr.levels) {
      if (s != sizes_.back()) sizes_.push_back(s);
    }
    coef_.reserve(sizes_.size());
    for (auto s : sizes_) coef_.emplace_back(Dims2{s, s});
  }

  /// Chain index of a pyramid size.
  [[nodiscard]] std::size_t index_of(std::int64_t size) const {
    return static_cast<std::size_t>(std::find(sizes_.begin(), sizes_.end(), size) - sizes_.begin());
  }

  [[nodiscard]] std::int64_t size(std::size_t k) const { return sizes_[k]; }
  [[nodiscard]] FlowFieldD& coef(std::size_t k) { return coef_[k]; }
  [[nodiscard]] const std::vector<FlowFieldD>& coefs() const { return coef_; }
  void set_coefs(const std::vector<FlowFieldD>& c) { coef_ = c; }

  [[nodiscard]] FlowFieldD compose(std::size_t top) const {
    FlowFieldD f = coef_[0];
    for (std::size_t k = 1; k <= top; ++k) {
      f = upsample_flow(f, coef_[k].dims);
      for (std::size_t i = 0; i < f.u.size(); ++i) {
        f.u[i] += coef_[k].u[i];
        f.v[i] += coef_[k].v[i];
      }
    }
    return f;
  }

  /// Gradients for every increment up to `top`, given d loss / d flow at `top`.
  [[nodiscard]] std::vector<FlowFieldD> pull_back(FlowFieldD g, std::size_t top) const {
    std::vector<FlowFieldD> out(top + 1);
    for (std::size_t k = top + 1; k-- > 0;) {
      if (k < top) g = upsample_flow_adjoint(g, coef_[k].dims);
      out[k] = g;
    }
    return out;
  }

 private:
  std::vector<std::int64_t> sizes_;
  std::vector<FlowFieldD> coef_;
};

}  // namespace detail

/// Coarse-to-fine minimization of the total flow loss. Levels are visited
/// coarse to fine on the box-downsampled pair; each starts from the
/// upsampled best flow of the previous level. Adam updates a hierarchy of
/// flow increments (global translation plus one increment per level). The
/// translation moves by about lr pixels per iteration; the other increments
/// are slowed so that neighbouring displacements drift apart by at most
/// epsilon per step, which keeps Adam's jitter inside the quadratic zone of
/// the smoothness penalty.
template <typename T>
[[nodiscard]] FlowResult register_flow(const Grid2<T>& moving, const Grid2<T>& fixed, const LossWeights& w,
                                       const Pyramid& pyramid, const OptimizerConfig& cfg = flow_defaults()) {
  w.validate();
  cfg.validate();
  if (!(moving.dims() == fixed.dims())) {
    throw InvalidArgument("register_flow: moving " + to_string(moving.dims()) + " and fixed " +
                          to_string(fixed.dims()) + " differ");
  }
  if (moving.nx() != moving.ny()) {
    throw InvalidArgument("register_flow: slices must be square, got " + to_string(moving.dims()));
  }
  pyramid.validate(moving.nx());
  if (is_constant(moving.data()) || is_constant(fixed.data())) {
    throw DegenerateInput("register_flow: moving and fixed slices must be non-constant");
  }

  FlowResult result;
  detail::FlowHierarchy hier(pyramid);
  std::int64_t global_it = 0;
  std::size_t top = 0;
  for (std::size_t level = 0; level < pyramid.levels.size(); ++level) {
    const std::int64_t size = pyramid.levels[level];
    if (level > 0 && size == pyramid.levels[level - 1]) continue;
    const auto f = downsample_to(fixed, size);
    const auto m = downsample_to(moving, size);
    top = hier.index_of(size);

    std::vector<Adam> adams;
    adams.reserve(top + 1);
    for (std::size_t k = 0; k <= top; ++k) {
      OptimizerConfig c = cfg;
      const double units = static_cast<double>(hier.size(k)) / static_cast<double>(size);
      c.lr = k == 0 ? cfg.lr / static_cast<double>(moving.nx()) : std::min(cfg.lr * units, w.epsilon);
      adams.emplace_back(static_cast<std::size_t>(2 * hier.coef(k).size()), c);
    }
    BestTracker tracker(cfg);
    auto best = hier.coefs();
    bool degenerate = false;
    std::vector<double> params;
    std::vector<double> grad;
    for (int it = 0; it < cfg.max_iters; ++it, ++global_it) {
      const auto flow = hier.compose(top);
      const auto eval = total_loss(f, m, flow, w);
      if (!std::isfinite(eval.value)) {
        throw DivergenceError("register_flow: non-finite loss at level " + std::to_string(level) + " (" +
                              std::to_string(size) + "x" + std::to_string(size) + "), iteration " +
                              std::to_string(it));
      }
      degenerate = degenerate || eval.correlation_degenerate;
      if (tracker.update(eval.value)) best = hier.coefs();
      result.trace.push_back({global_it, static_cast<int>(level), eval.value, tracker.best()});
      if (tracker.converged()) {
        ++global_it;
        break;
      }
      FlowFieldD g(flow.dims);
      g.u = eval.grad.u;
      g.v = eval.grad.v;
      const auto grads = hier.pull_back(std::move(g), top);
      for (std::size_t k = 0; k <= top; ++k) {
        auto& c = hier.coef(k);
        const auto n = static_cast<std::size_t>(c.size());
        params.assign(c.u.begin(), c.u.end());
        params.insert(params.end(), c.v.begin(), c.v.end());
        grad.assign(grads[k].u.begin(), grads[k].u.end());
        grad.insert(grad.end(), grads[k].v.begin(), grads[k].v.end());
        adams[k].step(params, grad);
        std::copy(params.begin(), params.begin() + static_cast<std::ptrdiff_t>(n), c.u.begin());
        std::copy(params.begin() + static_cast<std::ptrdiff_t>(n), params.end(), c.v.begin());
      }
    }
    if (degenerate) result.degenerate_levels.push_back(static_cast<int>(level));
    hier.set_coefs(best);
  }
  result.flow = hier.compose(top).cast<float>();
  result.final_loss = total_loss(fixed, moving, result.flow, w, false);
  return result;
}

// ---------------------------------------------------------------------------
// Affine + per-slice flow pipeline.

struct PipelineResult {
  AffineResult affine;
  /// One flow per axial slice.
  std::vector<FlowField> flows;
  /// Moving volume after the affine stage only.
  Volume affine_warped;
  /// Moving volume after affine and flow.
  Volume warped;
  /// Slices that received zero flow because they were constant after the affine stage.
  std::vector<std::int64_t> skipped_slices;
  std::vector<std::vector<TraceEntry>> slice_traces;
  /// Final loss components per slice (zero for skipped slices).
  std::vector<TotalLoss> slice_losses;
};

struct PipelineOptions {
  LossWeights weights{};
  OptimizerConfig affine = affine_defaults();
  OptimizerConfig flow = flow_defaults();
  /// Empty means Pyramid::for_size(slice width).
  Pyramid pyramid{};
  bool run_affine = true;
  bool run_flow = true;
  int jobs = 1;
};

/// Flow refinement of every axial slice of `moving` against `fixed`.
inline void refine_slices(const Volume& moving, const Volume& fixed, const PipelineOptions& opt,
                          PipelineResult& out) {
  const Dims3& d = moving.dims();
  const Pyramid pyr = opt.pyramid.levels.empty() ? Pyramid::for_size(d.nx) : opt.pyramid;
  out.flows.assign(static_cast<std::size_t>(d.nz), FlowField({d.nx, d.ny}));
  out.slice_traces.assign(static_cast<std::size_t>(d.nz), {});
  out.slice_losses.assign(static_cast<std::size_t>(d.nz), {});
  std::vector<char> skipped(static_cast<std::size_t>(d.nz), 0);
  parallel_for(d.nz, opt.jobs, [&](std::int64_t z) {
    const auto m = extract_slice(moving, z);
    const auto f = extract_slice(fixed, z);
    if (is_constant(m.data()) || is_constant(f.data())) {
      skipped[static_cast<std::size_t>(z)] = 1;
      return;
    }
    auto r = register_flow(m, f, opt.weights, pyr, opt.flow);
    out.flows[static_cast<std::size_t>(z)] = std::move(r.flow);
    out.slice_traces[static_cast<std::size_t>(z)] = std::move(r.trace);
    out.slice_losses[static_cast<std::size_t>(z)] = std::move(r.final_loss);
  });
  out.skipped_slices.clear();
  for (std::int64_t z = 0; z < d.nz; ++z) {
    if (skipped[static_cast<std::size_t>(z)] != 0) out.skipped_slices.push_back(z);
  }
}

/// Affine registration in 3D followed by flow refinement of every axial slice.
[[nodiscard]] inline PipelineResult register_volume_pipeline(const Volume& moving, const Volume& fixed,
                                                             const PipelineOptions& opt = {}) {
  if (!(moving.dims() == fixed.dims())) {
    throw InvalidArgument("pipeline: moving " + to_string(moving.dims()) + " and fixed " +
                          to_string(fixed.dims()) + " differ; resize first");
  }
  PipelineResult out;
  if (opt.run_affine) {
    out.affine = register_affine(moving, fixed, opt.affine);
    out.affine_warped = warp_affine(moving, out.affine.transform);
  } else {
    out.affine_warped = moving;
  }
  if (opt.run_flow) {
    refine_slices(out.affine_warped, fixed, opt, out);
    out.warped = warp_flow_stack(out.affine_warped, std::span<const FlowField>(out.flows));
  } else {
    out.flows.assign(static_cast<std::size_t>(moving.dims().nz), FlowField({moving.dims().nx, moving.dims().ny}));
    out.warped = out.affine_warped;
  }
  return out;
}

/// 0.10, 0.15, ..., 0.45.
[[nodiscard]] inline std::vector<double> default_alphas() {
  return {0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40, 0.45};
}

struct SweepRow {
  double alpha = 0.0;
  /// Mean over registered slices of the per-slice average flow magnitude.
  double magnitude = 0.0;
  /// Final loss components, averaged over registered slices.
  double total = 0.0;
  double photometric = 0.0;
  double correlation = 0.0;
  double smoothness = 0.0;
};

/// Flow-only registration of every slice for each alpha.
[[nodiscard]] inline std::vector<SweepRow> alpha_sweep(const Volume& moving, const Volume& fixed,
                                                       std::span<const double> alphas, PipelineOptions opt = {}) {
  if (!(moving.dims() == fixed.dims())) {
    throw InvalidArgument("alpha_sweep: moving " + to_string(moving.dims()) + " and fixed " +
                          to_string(fixed.dims()) + " differ");
  }
  std::vector<SweepRow> rows;
  for (double alpha : alphas) {
    opt.weights.alpha = alpha;
    opt.weights.validate();
    PipelineResult r;
    refine_slices(moving, fixed, opt, r);
    SweepRow row;
    row.alpha = alpha;
    std::int64_t n = 0;
    for (std::size_t z = 0; z < r.flows.size(); ++z) {
      if (std::find(r.skipped_slices.begin(), r.skipped_slices.end(), static_cast<std::int64_t>(z)) !=
          r.skipped_slices.end()) {
        continue;
      }
      const auto& l = r.slice_losses[z];
      row.magnitude += average_flow_magnitude(r.flows[z]);
      row.total += l.value;
      row.photometric += l.photometric;
      row.correlation += l.correlation;
      row.smoothness += l.smoothness;
      ++n;
    }
    if (n > 0) {
      const auto k = static_cast<double>(n);
      row.magnitude /= k;
      row.total /= k;
      row.photometric /= k;
      row.correlation /= k;
      row.smoothness /= k;
    }
    rows.push_back(row);
  }
  return rows;
}

/// CSV with header iteration,level,loss,best.
inline void write_trace_csv(const std::filesystem::path& path, std::span<const TraceEntry> trace) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "iteration,level,loss,best\n";
  char buf[128];
  for (const auto& e : trace) {
    std::snprintf(buf, sizeof(buf), "%lld,%d,%.17g,%.17g\n", static_cast<long long>(e.iteration), e.level, e.loss,
                  e.best);
    out << buf;
  }
}

}  // namespace regflow
