#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "regflow/regflow.hpp"

using namespace regflow;

TEST(WarpAffine, IdentityIsExact) {
  std::mt19937_64 rng(2);
  const auto v = oracle::random_volume(rng, {7, 6, 5});
  const auto w = warp_affine(v, AffineTransform::identity());
  for (std::int64_t i = 0; i < v.size(); ++i) EXPECT_NEAR(w[i], v[i], 1e-6);
}

TEST(WarpAffine, IntegerTranslationMovesVoxelWithoutBlur) {
  Volume v({5, 5, 3}, {});
  v(2, 2, 1) = 1.0F;
  const auto w = warp_affine(v, content_translation(1, 0, 0));
  for (std::int64_t z = 0; z < 3; ++z) {
    for (std::int64_t y = 0; y < 5; ++y) {
      for (std::int64_t x = 0; x < 5; ++x) EXPECT_EQ(w(x, y, z), (x == 3 && y == 2 && z == 1) ? 1.0F : 0.0F);
    }
  }
}

TEST(WarpAffine, ScalingPreservesConstantInsideBounds) {
  const Volume v({8, 8, 4}, {}, 0.7F);
  const auto w = warp_affine(v, content_scaling(2, 2, 1, grid_center(v.dims())));
  for (float x : w.data()) EXPECT_NEAR(x, 0.7F, 1e-6);
}

TEST(WarpAffine, SingularTransformRejected) {
  const Volume v({2, 2, 2}, {});
  AffineTransform t;
  t(0, 0) = 0.0;
  EXPECT_THROW((void)warp_affine(v, t), InvalidArgument);
}

TEST(AffineTransform, InverseAndComposition) {
  const auto t = content_rotation_z(11.0, {3, 4, 2}) * content_scaling(1.1, 0.9, 1.0, {3, 4, 2}) *
                 AffineTransform::translation(0.5, -1.5, 0.25);
  const auto id = t * t.inverse();
  const auto ref = AffineTransform::identity();
  for (std::size_t k = 0; k < 12; ++k) EXPECT_NEAR(id.m[k], ref.m[k], 1e-12);
  const auto p = t.apply(1.0, 2.0, 3.0);
  const auto q = t.inverse().apply(p[0], p[1], p[2]);
  EXPECT_NEAR(q[0], 1.0, 1e-12);
  EXPECT_NEAR(q[1], 2.0, 1e-12);
  EXPECT_NEAR(q[2], 3.0, 1e-12);
}

TEST(WarpFlow, ZeroFlowIsIdentity) {
  std::mt19937_64 rng(4);
  const auto s = extract_slice(oracle::random_volume(rng, {6, 5, 1}), 0);
  const auto w = warp_flow(s, FlowField(s.dims()));
  for (std::int64_t i = 0; i < s.size(); ++i) EXPECT_NEAR(w[i], s[i], 1e-6);
}

TEST(WarpFlow, UnitFlowShiftsOneColumn) {
  Slice s({5, 3});
  s(3, 1) = 1.0F;
  const auto w = warp_flow(s, FlowField(s.dims(), 1.0F, 0.0F));
  for (std::int64_t y = 0; y < 3; ++y) {
    for (std::int64_t x = 0; x < 5; ++x) EXPECT_EQ(w(x, y), (x == 2 && y == 1) ? 1.0F : 0.0F);
  }
}

TEST(WarpFlow, HalfPixelOnRamp) {
  Slice s({6, 2});
  for (std::int64_t y = 0; y < 2; ++y) {
    for (std::int64_t x = 0; x < 6; ++x) s(x, y) = 0.1F * static_cast<float>(x);
  }
  const auto w = warp_flow(s, FlowField(s.dims(), 0.5F, 0.0F));
  for (std::int64_t y = 0; y < 2; ++y) {
    for (std::int64_t x = 0; x < 5; ++x) EXPECT_NEAR(w(x, y), 0.1 * (x + 0.5), 1e-6);
  }
}

TEST(WarpFlow, DimsMismatchRejected) {
  const Slice s({4, 4});
  EXPECT_THROW((void)warp_flow(s, FlowField({4, 3})), InvalidArgument);
}

TEST(WarpMask, IdentityUnchanged) {
  std::mt19937_64 rng(5);
  const auto m = oracle::random_mask(rng, {6, 6, 3});
  EXPECT_EQ(warp_mask(m, AffineTransform::identity()), m);
}

TEST(WarpMask, ThresholdAtPointOne) {
  LabelMask m({6, 1, 1}, {});
  m(2, 0, 0) = 1;
  // Output voxel 2 samples 2 - shift; it receives 1 - shift of the mask voxel.
  const auto low = warp_mask(m, content_translation(0.91, 0, 0));
  EXPECT_EQ(low(2, 0, 0), 0);
  EXPECT_EQ(low(3, 0, 0), 1);
  const auto high = warp_mask(m, content_translation(0.89, 0, 0));
  EXPECT_EQ(high(2, 0, 0), 1);
  EXPECT_EQ(high(3, 0, 0), 1);
  EXPECT_EQ(binarize(Volume({2, 1, 1}, {}, std::vector<float>{0.09F, 0.11F})),
            LabelMask({2, 1, 1}, {}, std::vector<std::uint8_t>{0, 1}));
}

TEST(WarpMask, IntegerTranslationOfCube) {
  const auto cube = oracle::box_mask({10, 10, 6}, {}, {2, 3, 1}, {4, 5, 3});
  const auto w = warp_mask(cube, content_translation(2, -1, 1));
  EXPECT_EQ(w, oracle::shift_integer(cube, 2, -1, 1));
  EXPECT_EQ(oracle::count(w), oracle::count(cube));
}

TEST(WarpMask, FlowStackMatchesPerSliceWarp) {
  const auto cube = oracle::box_mask({8, 8, 2}, {}, {2, 2, 0}, {5, 5, 1});
  std::vector<FlowField> flows{FlowField({8, 8}, 1.0F, 0.0F), FlowField({8, 8}, 0.0F, -1.0F)};
  const auto w = warp_mask(cube, std::span<const FlowField>(flows));
  for (std::int64_t y = 0; y < 8; ++y) {
    for (std::int64_t x = 0; x < 8; ++x) {
      EXPECT_EQ(w(x, y, 0), cube.at_or_zero(x + 1, y, 0));
      EXPECT_EQ(w(x, y, 1), cube.at_or_zero(x, y - 1, 1));
    }
  }
}

TEST(Interpolate, GradientMatchesDifferences) {
  std::mt19937_64 rng(6);
  const auto v = oracle::random_volume_d(rng, {5, 5, 4});
  for (auto [x, y, z] : {std::array<double, 3>{1.3, 2.6, 1.2}, std::array<double, 3>{0.4, 3.7, 2.45}}) {
    const auto s = sample_trilinear_grad(v, x, y, z);
    const double h = 1e-6;
    EXPECT_NEAR(s.value, sample_trilinear(v, x, y, z), 1e-15);
    EXPECT_NEAR(s.dx, (sample_trilinear(v, x + h, y, z) - sample_trilinear(v, x - h, y, z)) / (2 * h), 1e-8);
    EXPECT_NEAR(s.dy, (sample_trilinear(v, x, y + h, z) - sample_trilinear(v, x, y - h, z)) / (2 * h), 1e-8);
    EXPECT_NEAR(s.dz, (sample_trilinear(v, x, y, z + h) - sample_trilinear(v, x, y, z - h)) / (2 * h), 1e-8);
  }
}
