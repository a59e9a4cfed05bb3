#pragma once

#include <algorithm>
#include <array>
#include <utility>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "regflow/error.hpp"
#include "regflow/grid.hpp"
#include "regflow/imaging.hpp"
#include "regflow/interpolate.hpp"
#include "regflow/resample.hpp"

namespace regflow {

/// Adaptive-moment descent settings. The defaults are the Adam settings used
/// to train the original networks; direct per-pair optimization usually wants
/// a larger step (see affine_defaults / flow_defaults).
struct OptimizerConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  int max_iters = 500;
  /// Stop once the best loss improved by less than tol (relative) over `patience` iterations.
  double tol = 1e-6;
  int patience = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(lr > 0)) throw InvalidArgument("optimizer lr must be > 0");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) {
      throw InvalidArgument("optimizer betas must lie in [0, 1)");
    }
    if (max_iters < 1) throw InvalidArgument("optimizer max_iters must be >= 1");
    if (!(tol >= 0)) throw InvalidArgument("optimizer tol must be >= 0");
    if (patience < 1) throw InvalidArgument("optimizer patience must be >= 1");
  }
};

/// Defaults for 12-parameter affine registration in the normalized frame.
[[nodiscard]] inline OptimizerConfig affine_defaults() {
  OptimizerConfig c;
  c.lr = 2e-3;
  c.max_iters = 500;
  return c;
}

/// Defaults for per-level flow refinement (displacements in pixels).
[[nodiscard]] inline OptimizerConfig flow_defaults() {
  OptimizerConfig c;
  c.lr = 0.05;
  c.max_iters = 200;
  return c;
}

class Adam {
 public:
  Adam(std::size_t n, const OptimizerConfig& cfg) : cfg_(cfg), m_(n, 0.0), v_(n, 0.0) { cfg.validate(); }

  void step(std::span<double> params, std::span<const double> grad) {
    if (params.size() != m_.size() || grad.size() != m_.size()) {
      throw InvalidArgument("Adam: parameter/gradient size mismatch");
    }
    ++t_;
    b1t_ *= cfg_.beta1;
    b2t_ *= cfg_.beta2;
    const double c1 = 1.0 - b1t_;
    const double c2 = 1.0 - b2t_;
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = cfg_.beta1 * m_[i] + (1.0 - cfg_.beta1) * grad[i];
      v_[i] = cfg_.beta2 * v_[i] + (1.0 - cfg_.beta2) * grad[i] * grad[i];
      const double mhat = m_[i] / c1;
      const double vhat = v_[i] / c2;
      params[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + kEpsilon);
    }
  }

  [[nodiscard]] std::int64_t iterations() const { return t_; }

 private:
  static constexpr double kEpsilon = 1e-8;
  OptimizerConfig cfg_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
  double b1t_ = 1.0;
  double b2t_ = 1.0;
};

/// Tracks the best loss and applies the relative-improvement stopping rule.
class BestTracker {
 public:
  explicit BestTracker(const OptimizerConfig& cfg) : tol_(cfg.tol), patience_(cfg.patience) {}

  /// Returns true when `loss` is a new best.
  bool update(double loss) {
    const bool improved = history_.empty() || loss < best_;
    if (improved) best_ = loss;
    history_.push_back(best_);
    return improved;
  }

  [[nodiscard]] double best() const { return best_; }

  [[nodiscard]] bool converged() const {
    const auto n = static_cast<std::int64_t>(history_.size());
    if (n <= patience_) return false;
    const double before = history_[static_cast<std::size_t>(n - 1 - patience_)];
    return before - best_ <= tol_ * std::abs(before);
  }

 private:
  double tol_;
  std::int64_t patience_;
  double best_ = 0.0;
  std::vector<double> history_;
};

struct TraceEntry {
  std::int64_t iteration = 0;
  int level = 0;
  double loss = 0.0;
  double best = 0.0;
};

/// Square pyramid resolutions, coarse to fine.
struct Pyramid {
  std::vector<std::int64_t> levels;

  /// 4, 8, ..., 256: seven resolutions.
  [[nodiscard]] static Pyramid standard() { return {{4, 8, 16, 32, 64, 128, 256}}; }

  /// Halves `finest` until `min_size` or `max_levels` is reached (or the size turns odd).
  [[nodiscard]] static Pyramid for_size(std::int64_t finest, int max_levels = 7, std::int64_t min_size = 4) {
    if (finest < 1) throw InvalidArgument("pyramid size must be >= 1");
    Pyramid p;
    std::int64_t n = finest;
    p.levels.push_back(n);
    while (static_cast<int>(p.levels.size()) < max_levels && n % 2 == 0 && n / 2 >= min_size) {
      n /= 2;
      p.levels.push_back(n);
    }
    std::reverse(p.levels.begin(), p.levels.end());
    return p;
  }

  /// Throws unless the levels are ascending powers-of-two ratios ending at `finest`.
  void validate(std::int64_t finest) const {
    if (levels.empty()) throw InvalidArgument("pyramid has no levels");
    if (levels.back() != finest) {
      throw InvalidArgument("finest pyramid level " + std::to_string(levels.back()) +
                            " must equal the slice size " + std::to_string(finest));
    }
    for (std::size_t k = 0; k < levels.size(); ++k) {
      if (levels[k] < 1) throw InvalidArgument("pyramid levels must be >= 1");
      if (k == 0) continue;
      const auto lo = levels[k - 1];
      const auto hi = levels[k];
      if (lo > hi) throw InvalidArgument("pyramid levels must be ordered coarse to fine");
      if (hi % lo != 0 || ((hi / lo) & (hi / lo - 1)) != 0) {
        throw InvalidArgument("pyramid level ratios must be powers of two");
      }
    }
  }
};

/// Repeated 2x box averaging down to `size` x `size`.
template <typename T>
[[nodiscard]] Grid2<T> downsample_to(const Grid2<T>& s, std::int64_t size) {
  Grid2<T> out = s;
  while (out.nx() > size) out = downsample2(out);
  if (out.nx() != size || out.ny() != size) {
    throw InvalidArgument("cannot box-downsample " + to_string(s.dims()) + " to " + std::to_string(size));
  }
  return out;
}

/// Bilinear upsampling of a coarse flow onto a finer grid (pixel centers
/// aligned, edge-clamped), with displacements scaled by the resolution ratio.
[[nodiscard]] inline FlowFieldD upsample_flow(const FlowFieldD& coarse, Dims2 fine) {
  const double rx = static_cast<double>(fine.nx) / static_cast<double>(coarse.dims.nx);
  const double ry = static_cast<double>(fine.ny) / static_cast<double>(coarse.dims.ny);
  const Grid2<double> cu(coarse.dims, coarse.u);
  const Grid2<double> cv(coarse.dims, coarse.v);
  FlowFieldD out(fine);
  for (std::int64_t y = 0; y < fine.ny; ++y) {
    const double cy = std::clamp((static_cast<double>(y) + 0.5) / ry - 0.5, 0.0,
                                 static_cast<double>(coarse.dims.ny - 1));
    for (std::int64_t x = 0; x < fine.nx; ++x) {
      const double cx = std::clamp((static_cast<double>(x) + 0.5) / rx - 0.5, 0.0,
                                   static_cast<double>(coarse.dims.nx - 1));
      const auto i = static_cast<std::size_t>(x + fine.nx * y);
      out.u[i] = rx * sample_bilinear(cu, cx, cy);
      out.v[i] = ry * sample_bilinear(cv, cx, cy);
    }
  }
  return out;
}

/// Adjoint of upsample_flow: maps a gradient on the fine grid to the coarse grid.
[[nodiscard]] inline FlowFieldD upsample_flow_adjoint(const FlowFieldD& fine_grad, Dims2 coarse) {
  const Dims2 fine = fine_grad.dims;
  const double rx = static_cast<double>(fine.nx) / static_cast<double>(coarse.nx);
  const double ry = static_cast<double>(fine.ny) / static_cast<double>(coarse.ny);
  FlowFieldD out(coarse);
  for (std::int64_t y = 0; y < fine.ny; ++y) {
    const double cy = std::clamp((static_cast<double>(y) + 0.5) / ry - 0.5, 0.0, static_cast<double>(coarse.ny - 1));
    const auto y0 = static_cast<std::int64_t>(std::floor(cy));
    const std::int64_t y1 = std::min(y0 + 1, coarse.ny - 1);
    const double fy = cy - static_cast<double>(y0);
    for (std::int64_t x = 0; x < fine.nx; ++x) {
      const double cx =
          std::clamp((static_cast<double>(x) + 0.5) / rx - 0.5, 0.0, static_cast<double>(coarse.nx - 1));
      const auto x0 = static_cast<std::int64_t>(std::floor(cx));
      const std::int64_t x1 = std::min(x0 + 1, coarse.nx - 1);
      const double fx = cx - static_cast<double>(x0);
      const auto i = static_cast<std::size_t>(x + fine.nx * y);
      const double gu = rx * fine_grad.u[i];
      const double gv = ry * fine_grad.v[i];
      const std::array<std::pair<std::int64_t, double>, 4> taps{{{x0 + coarse.nx * y0, (1 - fx) * (1 - fy)},
                                                                 {x1 + coarse.nx * y0, fx * (1 - fy)},
                                                                 {x0 + coarse.nx * y1, (1 - fx) * fy},
                                                                 {x1 + coarse.nx * y1, fx * fy}}};
      for (const auto& [j, wgt] : taps) {
        out.u[static_cast<std::size_t>(j)] += wgt * gu;
        out.v[static_cast<std::size_t>(j)] += wgt * gv;
      }
    }
  }
  return out;
}

}  // namespace regflow
