#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "regflow/grid.hpp"
#include "regflow/interpolate.hpp"
#include "regflow/resample.hpp"

namespace regflow {

/// How the smoothness sum enters the total loss.
enum class SmoothnessReduction {
  /// Plain sum over pixels, as in the written objective.
  sum,
  /// Sum divided by the pixel count, matching the photometric term's 1/N.
  mean,
};

/// Weights of the flow objective
///   gamma * photometric + zeta * correlation + lambda * smoothness
/// and the Charbonnier parameters shared by the photometric and smoothness terms.
struct LossWeights {
  double gamma = 1.0;
  double zeta = 1.0;
  double lambda = 0.5;
  double alpha = 0.2;
  double epsilon = 0.001;
  SmoothnessReduction smoothness_reduction = SmoothnessReduction::mean;

  void validate() const {
    if (!(gamma >= 0 && zeta >= 0 && lambda >= 0)) throw InvalidArgument("loss weights must be >= 0");
    if (!(epsilon > 0)) throw InvalidArgument("Charbonnier epsilon must be > 0");
    if (!(alpha > 0 && alpha <= 1)) throw InvalidArgument("Charbonnier alpha must lie in (0, 1]");
  }
};

/// Robust penalty (x^2 + eps^2)^alpha.
[[nodiscard]] inline double charbonnier(double x, double alpha, double epsilon) {
  return std::pow(x * x + epsilon * epsilon, alpha);
}

[[nodiscard]] inline double charbonnier_derivative(double x, double alpha, double epsilon) {
  return 2.0 * alpha * x * std::pow(x * x + epsilon * epsilon, alpha - 1.0);
}

struct PenaltyAndSlope {
  double value;
  double slope;
};

// One pow for both value and derivative.
[[nodiscard]] inline PenaltyAndSlope charbonnier_with_slope(double x, double alpha, double epsilon) {
  const double base = x * x + epsilon * epsilon;
  const double p = std::pow(base, alpha - 1.0);
  return {p * base, 2.0 * alpha * x * p};
}

// ---------------------------------------------------------------------------
// Correlation loss: 1 - Pearson r.

struct CorrelationTerms {
  double loss = 0.0;
  double mean_f = 0.0;
  double mean_m = 0.0;
  // dL/dm_i = coef_f * (f_i - mean_f) + coef_m * (m_i - mean_m)
  double coef_f = 0.0;
  double coef_m = 0.0;
  bool degenerate = false;
};

template <typename A, typename B>
[[nodiscard]] CorrelationTerms correlation_terms(std::span<const A> f, std::span<const B> m) {
  if (f.size() != m.size()) throw InvalidArgument("correlation inputs differ in size");
  if (f.empty()) throw InvalidArgument("correlation of empty inputs");
  const auto n = static_cast<double>(f.size());
  double sf = 0.0;
  double sm = 0.0;
  bool f_constant = true;
  bool m_constant = true;
  for (std::size_t i = 0; i < f.size(); ++i) {
    sf += static_cast<double>(f[i]);
    sm += static_cast<double>(m[i]);
    f_constant = f_constant && f[i] == f[0];
    m_constant = m_constant && m[i] == m[0];
  }
  CorrelationTerms t;
  // Summation error leaves a tiny variance for constant inputs, so test equality.
  if (f_constant || m_constant) {
    t.degenerate = true;
    return t;
  }
  t.mean_f = sf / n;
  t.mean_m = sm / n;
  double sff = 0.0;
  double smm = 0.0;
  double sfm = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double df = static_cast<double>(f[i]) - t.mean_f;
    const double dm = static_cast<double>(m[i]) - t.mean_m;
    sff += df * df;
    smm += dm * dm;
    sfm += df * dm;
  }
  if (!(sff > 0.0) || !(smm > 0.0)) {
    t.degenerate = true;
    return t;
  }
  const double denom = std::sqrt(sff) * std::sqrt(smm);
  t.loss = 1.0 - sfm / denom;
  t.coef_f = -1.0 / denom;
  t.coef_m = sfm / (denom * smm);
  return t;
}

template <typename A, typename B>
[[nodiscard]] double correlation_loss(std::span<const A> f, std::span<const B> m) {
  const auto t = correlation_terms(f, m);
  if (t.degenerate) throw DegenerateInput("correlation is undefined for a constant input");
  return t.loss;
}

/// 1 - Pearson correlation over all voxels; range [0, 2].
template <typename T>
[[nodiscard]] double corr_loss_3d(const Grid3<T>& fixed, const Grid3<T>& warped) {
  if (!(fixed.dims() == warped.dims())) throw InvalidArgument("corr_loss_3d: dims differ");
  return correlation_loss(fixed.data(), warped.data());
}

template <typename T>
[[nodiscard]] double corr_loss_2d(const Grid2<T>& fixed, const Grid2<T>& warped) {
  if (!(fixed.dims() == warped.dims())) throw InvalidArgument("corr_loss_2d: dims differ");
  return correlation_loss(fixed.data(), warped.data());
}

struct AffineLoss {
  double loss = 0.0;
  /// d loss / d m[k] for the 12 row-major matrix entries (voxel units).
  std::array<double, 12> grad{};
};

/// corr_loss_3d(fixed, warp_affine(moving, t)) and its gradient with respect
/// to the 12 matrix entries, chained through trilinear sampling. The warped
/// volume is kept in double precision.
template <typename T>
[[nodiscard]] AffineLoss corr_loss_3d_affine(const Grid3<T>& fixed, const Grid3<T>& moving,
                                             const AffineTransform& t) {
  if (!(fixed.dims() == moving.dims())) throw InvalidArgument("corr_loss_3d_affine: dims differ");
  const Dims3& d = moving.dims();
  std::vector<double> warped(static_cast<std::size_t>(d.count()));
  std::size_t i = 0;
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
        const auto p = t.apply(static_cast<double>(x), static_cast<double>(y), static_cast<double>(z));
        warped[i] = sample_trilinear(moving, p[0], p[1], p[2]);
      }
    }
  }
  const auto terms = correlation_terms(fixed.data(), std::span<const double>(warped));
  if (terms.degenerate) {
    throw DegenerateInput("corr_loss_3d: fixed or warped moving volume is constant");
  }
  AffineLoss out;
  out.loss = terms.loss;
  i = 0;
  for (std::int64_t z = 0; z < d.nz; ++z) {
    const auto zd = static_cast<double>(z);
    for (std::int64_t y = 0; y < d.ny; ++y) {
      const auto yd = static_cast<double>(y);
      for (std::int64_t x = 0; x < d.nx; ++x, ++i) {
        const auto xd = static_cast<double>(x);
        const auto p = t.apply(xd, yd, zd);
        const auto s = sample_trilinear_grad(moving, p[0], p[1], p[2]);
        if (s.dx == 0.0 && s.dy == 0.0 && s.dz == 0.0) continue;
        const double dl = terms.coef_f * (static_cast<double>(fixed[static_cast<std::int64_t>(i)]) - terms.mean_f) +
                          terms.coef_m * (warped[i] - terms.mean_m);
        const std::array<double, 3> g{dl * s.dx, dl * s.dy, dl * s.dz};
        for (int r = 0; r < 3; ++r) {
          out.grad[static_cast<std::size_t>(4 * r + 0)] += g[static_cast<std::size_t>(r)] * xd;
          out.grad[static_cast<std::size_t>(4 * r + 1)] += g[static_cast<std::size_t>(r)] * yd;
          out.grad[static_cast<std::size_t>(4 * r + 2)] += g[static_cast<std::size_t>(r)] * zd;
          out.grad[static_cast<std::size_t>(4 * r + 3)] += g[static_cast<std::size_t>(r)];
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Flow objective terms.

/// (1/N) * sum rho(F - Mw).
template <typename A, typename B>
[[nodiscard]] double photometric_loss(const Grid2<A>& fixed, const Grid2<B>& warped, double alpha,
                                      double epsilon) {
  if (!(fixed.dims() == warped.dims())) throw InvalidArgument("photometric_loss: dims differ");
  double sum = 0.0;
  for (std::int64_t i = 0; i < fixed.size(); ++i) {
    sum += charbonnier(static_cast<double>(fixed[i]) - static_cast<double>(warped[i]), alpha, epsilon);
  }
  return sum / static_cast<double>(fixed.size());
}

struct FlowGradient {
  std::vector<double> u;
  std::vector<double> v;
};

/// Sum over pixels of rho on the four forward differences of u and v. The
/// difference past the last column/row is taken as 0, so each such term
/// contributes rho(0).
template <typename F>
[[nodiscard]] double smoothness_loss(const BasicFlowField<F>& flow, double alpha, double epsilon,
                                     FlowGradient* grad = nullptr) {
  const std::int64_t nx = flow.dims.nx;
  const std::int64_t ny = flow.dims.ny;
  if (grad != nullptr) {
    grad->u.assign(static_cast<std::size_t>(flow.size()), 0.0);
    grad->v.assign(static_cast<std::size_t>(flow.size()), 0.0);
  }
  const double rho0 = charbonnier(0.0, alpha, epsilon);
  double sum = 0.0;
  auto term = [&](const std::vector<F>& c, std::vector<double>* g, std::size_t a, std::size_t b) {
    const auto ps = charbonnier_with_slope(static_cast<double>(c[a]) - static_cast<double>(c[b]), alpha, epsilon);
    sum += ps.value;
    if (g != nullptr) {
      (*g)[a] += ps.slope;
      (*g)[b] -= ps.slope;
    }
  };
  for (std::int64_t y = 0; y < ny; ++y) {
    for (std::int64_t x = 0; x < nx; ++x) {
      const auto i = static_cast<std::size_t>(x + nx * y);
      auto* gu = grad != nullptr ? &grad->u : nullptr;
      auto* gv = grad != nullptr ? &grad->v : nullptr;
      if (x + 1 < nx) {
        term(flow.u, gu, i, i + 1);
        term(flow.v, gv, i, i + 1);
      } else {
        sum += 2.0 * rho0;
      }
      if (y + 1 < ny) {
        term(flow.u, gu, i, i + static_cast<std::size_t>(nx));
        term(flow.v, gv, i, i + static_cast<std::size_t>(nx));
      } else {
        sum += 2.0 * rho0;
      }
    }
  }
  return sum;
}

struct TotalLoss {
  double value = 0.0;
  double photometric = 0.0;
  double correlation = 0.0;
  /// Smoothness term after the configured reduction.
  double smoothness = 0.0;
  /// Set when the correlation term was undefined (constant fixed or warped
  /// slice); that term then contributes 0 to value and gradient.
  bool correlation_degenerate = false;
  FlowGradient grad;
};

/// gamma * photometric + zeta * corr_2d + lambda * smoothness evaluated on
/// Mw = warp_flow(moving, flow), with the gradient w.r.t. (u, v).
template <typename T, typename F>
[[nodiscard]] TotalLoss total_loss(const Grid2<T>& fixed, const Grid2<T>& moving, const BasicFlowField<F>& flow,
                                   const LossWeights& w, bool with_gradient = true) {
  w.validate();
  if (!(fixed.dims() == moving.dims()) || !(flow.dims == moving.dims())) {
    throw InvalidArgument("total_loss: fixed " + to_string(fixed.dims()) + ", moving " +
                          to_string(moving.dims()) + " and flow " + to_string(flow.dims) + " must agree");
  }
  const std::int64_t nx = moving.nx();
  const std::int64_t ny = moving.ny();
  const auto n = static_cast<std::size_t>(moving.size());
  std::vector<double> warped(n);
  std::vector<double> gx(with_gradient ? n : 0);
  std::vector<double> gy(with_gradient ? n : 0);
  for (std::int64_t y = 0; y < ny; ++y) {
    for (std::int64_t x = 0; x < nx; ++x) {
      const auto i = static_cast<std::size_t>(x + nx * y);
      const double sx = static_cast<double>(x) + static_cast<double>(flow.u[i]);
      const double sy = static_cast<double>(y) + static_cast<double>(flow.v[i]);
      if (with_gradient) {
        const auto s = sample_bilinear_grad(moving, sx, sy);
        warped[i] = s.value;
        gx[i] = s.dx;
        gy[i] = s.dy;
      } else {
        warped[i] = sample_bilinear(moving, sx, sy);
      }
    }
  }

  TotalLoss out;
  // dL/dMw per pixel, accumulated from the photometric and correlation terms.
  std::vector<double> dmw(with_gradient ? n : 0, 0.0);

  if (w.gamma != 0.0) {
    double sum = 0.0;
    const double scale = w.gamma / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto ps = charbonnier_with_slope(static_cast<double>(fixed[static_cast<std::int64_t>(i)]) - warped[i],
                                             w.alpha, w.epsilon);
      sum += ps.value;
      if (with_gradient) dmw[i] -= scale * ps.slope;
    }
    out.photometric = sum / static_cast<double>(n);
  } else {
    out.photometric = photometric_loss(fixed, Grid2<double>(moving.dims(), warped), w.alpha, w.epsilon);
  }

  const auto corr = correlation_terms(fixed.data(), std::span<const double>(warped));
  out.correlation_degenerate = corr.degenerate;
  if (!corr.degenerate) {
    out.correlation = corr.loss;
    if (with_gradient && w.zeta != 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        dmw[i] += w.zeta * (corr.coef_f * (static_cast<double>(fixed[static_cast<std::int64_t>(i)]) - corr.mean_f) +
                            corr.coef_m * (warped[i] - corr.mean_m));
      }
    }
  }

  FlowGradient smooth_grad;
  out.smoothness = smoothness_loss(flow, w.alpha, w.epsilon,
                                   with_gradient && w.lambda != 0.0 ? &smooth_grad : nullptr);

  const double smooth_scale = w.smoothness_reduction == SmoothnessReduction::mean ? 1.0 / static_cast<double>(n) : 1.0;
  out.smoothness *= smooth_scale;
  out.value = w.gamma * out.photometric + w.zeta * out.correlation + w.lambda * out.smoothness;

  if (with_gradient) {
    out.grad.u.assign(n, 0.0);
    out.grad.v.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      out.grad.u[i] = dmw[i] * gx[i];
      out.grad.v[i] = dmw[i] * gy[i];
    }
    if (w.lambda != 0.0) {
      for (std::size_t i = 0; i < n; ++i) {
        out.grad.u[i] += w.lambda * smooth_scale * smooth_grad.u[i];
        out.grad.v[i] += w.lambda * smooth_scale * smooth_grad.v[i];
      }
    }
  }
  return out;
}

}  // namespace regflow
