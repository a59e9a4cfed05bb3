#include <gtest/gtest.h>

#include <set>

#include "oracles.hpp"
#include "regflow/regflow.hpp"

using namespace regflow;

TEST(Phantom, NoiseFreeVolumeHasFourIntensities) {
  const auto spec = PhantomSpec::standard({48, 48, 12});
  const auto p = make_phantom(spec);
  const std::set<float> allowed{static_cast<float>(spec.intensity.background), static_cast<float>(spec.intensity.brain),
                                static_cast<float>(spec.intensity.ventricle), static_cast<float>(spec.intensity.wml)};
  std::set<float> seen(p.volume.data().begin(), p.volume.data().end());
  for (float v : seen) EXPECT_TRUE(allowed.count(v)) << v;
  EXPECT_EQ(seen.size(), 4U);
}

TEST(Phantom, SameSeedIsBitIdentical) {
  auto spec = PhantomSpec::standard({32, 32, 8}, {}, 4, 9);
  spec.noise_sigma = 0.02;
  const auto a = make_phantom(spec);
  const auto b = make_phantom(spec);
  EXPECT_EQ(a.volume, b.volume);
  EXPECT_EQ(a.brain, b.brain);
  EXPECT_EQ(a.ventricles, b.ventricles);
  EXPECT_EQ(a.wml, b.wml);
  auto other = spec;
  other.seed = 10;
  EXPECT_NE(make_phantom(other).volume, a.volume);
}

TEST(Phantom, StructuresAreSubsetsOfBrain) {
  const auto p = make_phantom(PhantomSpec::standard({64, 64, 16}, {0.9, 0.9, 3.0}, 6, 3));
  EXPECT_GT(oracle::count(p.ventricles), 0);
  EXPECT_GT(oracle::count(p.wml), 0);
  for (std::int64_t i = 0; i < p.brain.size(); ++i) {
    if (p.ventricles[i] != 0 || p.wml[i] != 0) {
      EXPECT_EQ(p.brain[i], 1);
    }
  }
}

TEST(Phantom, SymmetricPhantomIsMirrorSymmetric) {
  const auto p = make_phantom(PhantomSpec::symmetric({64, 64, 16}));
  const Dims3 d = p.volume.dims();
  for (std::int64_t z = 0; z < d.nz; ++z) {
    for (std::int64_t y = 0; y < d.ny; ++y) {
      for (std::int64_t x = 0; x < d.nx; ++x) EXPECT_EQ(p.volume(x, y, z), p.volume(d.nx - 1 - x, y, z));
    }
  }
}

TEST(Phantom, SubjectVariantDiffers) {
  const Dims3 d{64, 64, 16};
  const auto a = make_phantom(PhantomSpec::standard(d));
  const auto b = make_phantom(phantom_subject(d, {}, 0.95, 1.0, 1.0, 7));
  EXPECT_LT(oracle::count(b.brain), oracle::count(a.brain));
  EXPECT_EQ(make_phantom(phantom_subject(d, {}, 1.0, 1.0, 1.0, 0)).volume, a.volume);
}

TEST(ApplyKnownTransform, IdentityUnchanged) {
  const auto p = make_phantom(PhantomSpec::standard({32, 32, 8}));
  const auto t = apply_known_transform(p, AffineTransform::identity());
  EXPECT_EQ(t.images.volume, p.volume);
  EXPECT_EQ(t.images.brain, p.brain);
  EXPECT_EQ(t.images.ventricles, p.ventricles);
  EXPECT_EQ(t.images.wml, p.wml);
}

TEST(ApplyKnownTransform, IntegerTranslationPreservesCounts) {
  const auto p = make_phantom(PhantomSpec::standard({48, 48, 12}));
  const auto t = apply_known_transform(p, content_translation(3, -2, 1));
  EXPECT_EQ(oracle::count(t.images.brain), oracle::count(p.brain));
  EXPECT_EQ(oracle::count(t.images.ventricles), oracle::count(p.ventricles));
  EXPECT_EQ(oracle::count(t.images.wml), oracle::count(p.wml));
  EXPECT_EQ(t.images.brain, oracle::shift_integer(p.brain, 3, -2, 1));
}

TEST(ApplyKnownTransform, FiveDegreeRotationShowsInHeadAngle) {
  const auto p = make_phantom(PhantomSpec::standard({64, 64, 16}));
  const auto t = apply_known_transform(p, content_rotation_z(5.0, grid_center(p.volume.dims())));
  EXPECT_NEAR(head_angle(t.images.volume), 5.0, 0.5);
}

TEST(Phantom, RejectsStructuresOutsideHead) {
  auto spec = PhantomSpec::standard({32, 32, 8}, {}, 0);
  spec.ventricles[0].semi_axes = {40, 40, 40};
  EXPECT_THROW((void)make_phantom(spec), InvalidArgument);
}
