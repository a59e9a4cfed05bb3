#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "regflow/regflow.hpp"

using namespace regflow;

namespace {

const std::vector<std::pair<Dims3, Spacing3>>& oracle_grids() {
  static const std::vector<std::pair<Dims3, Spacing3>> g{
      {{16, 16, 16}, {1, 1, 1}}, {{9, 7, 5}, {0.5, 0.5, 3.0}}, {{12, 10, 4}, {1.0, 0.8, 2.5}}, {{3, 3, 3}, {1, 1, 1}}};
  return g;
}

}  // namespace

TEST(StructureVolume, Examples) {
  EXPECT_EQ(structure_volume(LabelMask({4, 4, 4}, {})), 0.0);
  LabelMask ten({10, 1, 1}, {0.5, 0.5, 3.0}, 1);
  EXPECT_DOUBLE_EQ(structure_volume(ten), 7.5);
  EXPECT_DOUBLE_EQ(structure_volume(LabelMask({2, 2, 2}, {}, 1)), 8.0);
}

TEST(ProportionalVolume, Examples) {
  std::mt19937_64 rng(1);
  const auto b = oracle::random_mask(rng, {6, 6, 6}, {}, 0.6);
  EXPECT_DOUBLE_EQ(proportional_volume(b, b), 1.0);
  EXPECT_DOUBLE_EQ(proportional_volume(LabelMask(b.dims(), {}), b), 0.0);
  const Spacing3 sp{0.5, 0.5, 3.0};
  LabelMask s({100, 10, 1}, sp);
  for (int i = 0; i < 10; ++i) s[i] = 1;
  const LabelMask brain({100, 10, 1}, sp, 1);
  EXPECT_DOUBLE_EQ(structure_volume(brain), 750.0);
  EXPECT_DOUBLE_EQ(proportional_volume(s, brain), 0.01);
  EXPECT_THROW((void)proportional_volume(s, LabelMask(s.dims(), sp)), DegenerateInput);
}

TEST(DeltaPv, Examples) {
  const auto brain = oracle::box_mask({10, 10, 4}, {}, {0, 0, 0}, {9, 9, 3});
  const auto s = oracle::box_mask({10, 10, 4}, {}, {2, 2, 1}, {3, 3, 1});
  EXPECT_EQ(delta_pv(s, brain, s, brain), 0.0);
  const auto doubled = oracle::box_mask({10, 10, 4}, {}, {2, 2, 1}, {3, 3, 2});
  EXPECT_DOUBLE_EQ(delta_pv(s, brain, doubled, brain), -proportional_volume(s, brain));
}

TEST(DeltaPv, IdentityPipelineOnPhantom) {
  const auto p = make_phantom(PhantomSpec::standard({32, 32, 8}));
  const auto id = AffineTransform::identity();
  const auto vent = warp_mask(p.ventricles, id);
  const auto brain = warp_mask(p.brain, id);
  EXPECT_LT(std::abs(delta_pv(p.ventricles, p.brain, vent, brain)), 1e-6);
}

TEST(VolumeRatio, Examples) {
  const auto a = oracle::box_mask({8, 8, 4}, {}, {1, 1, 1}, {2, 2, 1});
  EXPECT_EQ(volume_ratio(a, a), 1.0);
  const auto doubled = oracle::box_mask({8, 8, 4}, {}, {1, 1, 1}, {2, 2, 2});
  EXPECT_EQ(volume_ratio(a, doubled), 0.5);
  EXPECT_EQ(volume_ratio(a, warp_mask(a, content_translation(3, 2, 1))), 1.0);
  EXPECT_THROW((void)volume_ratio(a, LabelMask(a.dims(), {})), DegenerateInput);
}

TEST(Ssd, IdenticalMasksGiveZero) {
  const auto b = oracle::box_mask({10, 10, 10}, {}, {2, 2, 2}, {7, 7, 7});
  EXPECT_EQ(ssd(b, b), 0.0);
}

TEST(Ssd, ConcentricCubesMatchAllPairs) {
  const Dims3 d{15, 15, 15};
  const auto inner = oracle::box_mask(d, {}, {5, 5, 5}, {9, 9, 9});
  const auto outer = oracle::box_mask(d, {}, {2, 2, 2}, {12, 12, 12});
  EXPECT_EQ(ssd(inner, outer), oracle::ssd(inner, outer));
  EXPECT_DOUBLE_EQ(oracle::ssd(inner, outer), 3.0);
}

TEST(Ssd, AnisotropicAxialSpacing) {
  const Dims3 d{9, 9, 9};
  // A single-voxel structure two slices below the top face of a slab brain:
  // the nearest brain-boundary voxel is axial, so the distance scales by 3.
  const auto brain = oracle::box_mask(d, {}, {0, 0, 0}, {8, 8, 6});
  const auto point = oracle::box_mask(d, {}, {4, 4, 4}, {4, 4, 4});
  EXPECT_DOUBLE_EQ(ssd(point, brain), 2.0);
  const LabelMask brain3(d, {1, 1, 3}, brain.values());
  const LabelMask point3(d, {1, 1, 3}, point.values());
  EXPECT_DOUBLE_EQ(oracle::ssd(point3, brain3), 4.0);
  EXPECT_DOUBLE_EQ(ssd(point3, brain3), oracle::ssd(point3, brain3));
}

TEST(Ssd, RandomMasksMatchAllPairs) {
  std::mt19937_64 rng(2);
  for (const auto& [d, sp] : oracle_grids()) {
    for (int k = 0; k < 3; ++k) {
      const auto s = oracle::random_mask(rng, d, sp, 0.3);
      const auto b = oracle::random_mask(rng, d, sp, 0.6);
      EXPECT_NEAR(ssd(s, b), oracle::ssd(s, b), 1e-9);
    }
  }
}

TEST(Ssd, EmptyBoundaryRejected) {
  const auto b = oracle::box_mask({6, 6, 6}, {}, {1, 1, 1}, {4, 4, 4});
  EXPECT_THROW((void)ssd(LabelMask(b.dims(), {}), b), DegenerateInput);
  EXPECT_THROW((void)ssd(b, LabelMask(b.dims(), {})), DegenerateInput);
}

TEST(DistanceTransform, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  for (const auto& [d, sp] : oracle_grids()) {
    const auto sites = oracle::random_mask(rng, d, sp, 0.05);
    const auto dist = squared_distance_transform(sites);
    for (std::int64_t z = 0; z < d.nz; ++z) {
      for (std::int64_t y = 0; y < d.ny; ++y) {
        for (std::int64_t x = 0; x < d.nx; ++x) {
          double best = std::numeric_limits<double>::infinity();
          for (std::int64_t i = 0; i < sites.size(); ++i) {
            if (sites[i] == 0) continue;
            const std::int64_t sx = i % d.nx;
            const std::int64_t sy = (i / d.nx) % d.ny;
            const std::int64_t sz = i / (d.nx * d.ny);
            const double dx = static_cast<double>(x - sx) * sp.x;
            const double dy = static_cast<double>(y - sy) * sp.y;
            const double dz = static_cast<double>(z - sz) * sp.z;
            best = std::min(best, dx * dx + dy * dy + dz * dz);
          }
          if (std::isinf(best)) {
            EXPECT_TRUE(std::isinf(dist(x, y, z)));
          } else {
            EXPECT_NEAR(dist(x, y, z), best, 1e-9);
          }
        }
      }
    }
  }
}

TEST(Boundary6, MatchesOracle) {
  std::mt19937_64 rng(4);
  const auto m = oracle::random_mask(rng, {7, 6, 5}, {}, 0.6);
  const auto b = boundary6(m);
  LabelMask ref(m.dims(), m.spacing());
  for (const auto& p : oracle::boundary_points(m)) ref(p[0], p[1], p[2]) = 1;
  EXPECT_EQ(b, ref);
}

TEST(DeltaSsd, Examples) {
  EXPECT_EQ(delta_ssd(3.0, 3.0), 0.0);
  EXPECT_EQ(delta_ssd(3.0, 1.5), 0.5);
  EXPECT_THROW((void)delta_ssd(0.0, 1.0), DegenerateInput);
}

TEST(Pwa, Examples) {
  std::mt19937_64 rng(5);
  const auto f = oracle::random_volume(rng, {6, 5, 4}, {}, 0.2, 0.8);
  const auto zero = pwa(f, f);
  for (double p : zero.per_slice) EXPECT_EQ(p, 0.0);
  Volume plus(f.dims(), {});
  Volume minus(f.dims(), {});
  for (std::int64_t i = 0; i < f.size(); ++i) {
    plus[i] = f[i] + 0.1F;
    minus[i] = f[i] - 0.1F;
  }
  for (double p : pwa(plus, f).per_slice) EXPECT_NEAR(p, 0.01, 1e-7);
  const std::vector<Volume> both{plus, minus};
  const auto two = pwa(both, f);
  ASSERT_EQ(two.per_slice.size(), 4U);
  for (double p : two.per_slice) EXPECT_NEAR(p, 0.01, 1e-7);
}

TEST(Pwa, MatchesBruteForce) {
  std::mt19937_64 rng(6);
  for (const auto& [d, sp] : oracle_grids()) {
    const auto f = oracle::random_volume(rng, d, sp);
    const std::vector<Volume> vols{oracle::random_volume(rng, d, sp), oracle::random_volume(rng, d, sp),
                                   oracle::random_volume(rng, d, sp)};
    const auto got = pwa(vols, f);
    const auto [per, total] = oracle::pwa(vols, f);
    EXPECT_NEAR(got.total, total, 1e-9);
    for (std::size_t z = 0; z < per.size(); ++z) EXPECT_NEAR(got.per_slice[z], per[z], 1e-9);
  }
}

TEST(Dsc, Examples) {
  const auto a = oracle::box_mask({6, 6, 1}, {}, {0, 0, 0}, {1, 1, 0});
  EXPECT_EQ(dsc(a, a), 1.0);
  const auto far = oracle::box_mask({6, 6, 1}, {}, {4, 4, 0}, {5, 5, 0});
  EXPECT_EQ(dsc(a, far), 0.0);
  const auto half = oracle::box_mask({6, 6, 1}, {}, {1, 0, 0}, {2, 1, 0});
  EXPECT_EQ(dsc(a, half), 0.5);
  EXPECT_THROW((void)dsc(LabelMask(a.dims(), {}), LabelMask(a.dims(), {})), DegenerateInput);
}

TEST(Dsc, MatchesBruteForceExactly) {
  std::mt19937_64 rng(7);
  for (const auto& [d, sp] : oracle_grids()) {
    const auto a = oracle::random_mask(rng, d, sp, 0.5);
    const auto b = oracle::random_mask(rng, d, sp, 0.3);
    EXPECT_EQ(dsc(a, b), oracle::dsc(a, b));
  }
}

TEST(MutualInformation, IndependentPairIsZero) {
  // x picks one of 4 bins for m and y one of 4 bins for f: every joint cell
  // has the same count, so the joint histogram is the product of marginals.
  Volume m({16, 16, 1}, {});
  Volume f({16, 16, 1}, {});
  for (std::int64_t y = 0; y < 16; ++y) {
    for (std::int64_t x = 0; x < 16; ++x) {
      m(x, y, 0) = 0.1F + 0.2F * static_cast<float>(x % 4);
      f(x, y, 0) = 0.15F + 0.2F * static_cast<float>(y % 4);
    }
  }
  EXPECT_NEAR(mutual_information(m, f), 0.0, 1e-9);
}

TEST(MutualInformation, FourEqualBinsGiveTwoBits) {
  Volume v({4, 4, 4}, {});
  for (std::int64_t i = 0; i < v.size(); ++i) v[i] = 0.1F + 0.25F * static_cast<float>(i % 4);
  EXPECT_NEAR(mutual_information(v, v), 2.0, 1e-12);
  const Volume c({4, 4, 4}, {}, 0.3F);
  EXPECT_EQ(mutual_information(c, c), 0.0);
}

TEST(MutualInformation, MatchesBruteForce) {
  std::mt19937_64 rng(8);
  for (const auto& [d, sp] : oracle_grids()) {
    const auto a = oracle::random_volume(rng, d, sp);
    const auto b = oracle::random_volume(rng, d, sp, -0.05, 1.05);
    EXPECT_NEAR(mutual_information(a, b), oracle::mutual_information(a, b), 1e-9);
    EXPECT_NEAR(mutual_information(a, a), oracle::mutual_information(a, a), 1e-9);
  }
}

TEST(PearsonR, Examples) {
  std::mt19937_64 rng(9);
  const auto f = oracle::random_volume(rng, {5, 5, 5});
  Volume inv(f.dims(), {});
  Volume aff(f.dims(), {});
  for (std::int64_t i = 0; i < f.size(); ++i) {
    inv[i] = 1.0F - f[i];
    aff[i] = 2.0F * f[i] + 0.05F;
  }
  EXPECT_NEAR(pearson_r(f, f), 1.0, 1e-12);
  EXPECT_NEAR(pearson_r(f, inv), -1.0, 1e-6);
  EXPECT_NEAR(pearson_r(f, aff), 1.0, 1e-6);
  EXPECT_THROW((void)pearson_r(f, Volume(f.dims(), {}, 0.2F)), DegenerateInput);
}

TEST(PearsonR, MatchesBruteForce) {
  std::mt19937_64 rng(10);
  for (const auto& [d, sp] : oracle_grids()) {
    const auto a = oracle::random_volume(rng, d, sp);
    const auto b = oracle::random_volume(rng, d, sp);
    EXPECT_NEAR(pearson_r(a, b), oracle::pearson(a, b), 1e-9);
  }
}

TEST(Atlas, Examples) {
  std::mt19937_64 rng(11);
  const auto f = oracle::random_volume(rng, {5, 4, 3}, {}, 0.2, 0.8);
  EXPECT_EQ(build_atlas(std::vector<Volume>{f}), f);
  Volume plus(f.dims(), {});
  Volume minus(f.dims(), {});
  for (std::int64_t i = 0; i < f.size(); ++i) {
    plus[i] = f[i] + 0.125F;
    minus[i] = f[i] - 0.125F;
  }
  const auto a = build_atlas(std::vector<Volume>{plus, minus});
  for (std::int64_t i = 0; i < f.size(); ++i) EXPECT_NEAR(a[i], f[i], 1e-6);
  const std::vector<Volume> three{oracle::random_volume(rng, f.dims()), oracle::random_volume(rng, f.dims()),
                                  oracle::random_volume(rng, f.dims())};
  const auto mean = build_atlas(three);
  for (std::int64_t i = 0; i < f.size(); ++i) {
    const double ref = (static_cast<double>(three[0][i]) + three[1][i] + three[2][i]) / 3.0;
    EXPECT_NEAR(mean[i], ref, 1e-7);
  }
}

TEST(Maid, Examples) {
  std::mt19937_64 rng(12);
  const auto f = oracle::random_volume(rng, {6, 6, 6});
  EXPECT_EQ(maid(f, f), 0.0);
  const Volume a({4, 4, 4}, {}, static_cast<float>(10.5 / 256.0));
  const Volume b({4, 4, 4}, {}, static_cast<float>(200.5 / 256.0));
  EXPECT_DOUBLE_EQ(maid(a, b), 2.0 / 256.0);
  EXPECT_THROW((void)maid(a, b, kBackgroundBins), DegenerateInput);
}

TEST(Maid, MatchesBruteForce) {
  std::mt19937_64 rng(13);
  for (const auto& [d, sp] : oracle_grids()) {
    const auto a = oracle::random_volume(rng, d, sp);
    const auto b = oracle::random_volume(rng, d, sp, -0.1, 1.1);
    for (int nulled : {0, kBackgroundBins}) EXPECT_NEAR(maid(a, b, nulled), oracle::maid(a, b, nulled), 1e-9);
  }
}

TEST(BrainHeatmap, Examples) {
  const auto m = oracle::box_mask({6, 6, 2}, {}, {1, 1, 0}, {3, 3, 1});
  const auto other = oracle::box_mask({6, 6, 2}, {}, {4, 4, 0}, {5, 5, 1});
  const auto same = brain_heatmap(std::vector<LabelMask>{m, m, m});
  for (std::int64_t i = 0; i < m.size(); ++i) EXPECT_EQ(same[i], static_cast<float>(m[i]));
  const auto disjoint = brain_heatmap(std::vector<LabelMask>{m, other});
  for (std::int64_t i = 0; i < m.size(); ++i) {
    EXPECT_EQ(disjoint[i], (m[i] != 0 || other[i] != 0) ? 0.5F : 0.0F);
  }
}

TEST(HeadAngle, SymmetricPhantomIsUpright) {
  const auto p = make_phantom(PhantomSpec::symmetric({64, 64, 16}));
  EXPECT_LE(std::abs(head_angle(p.volume)), 0.5);
}

TEST(HeadAngle, RecoversSevenDegrees) {
  const auto p = make_phantom(PhantomSpec::symmetric({64, 64, 16}));
  const auto r = warp_affine(p.volume, content_rotation_z(7.0, grid_center(p.volume.dims())));
  EXPECT_NEAR(head_angle(r), 7.0, 0.5);
  const auto neg = warp_affine(p.volume, content_rotation_z(-5.0, grid_center(p.volume.dims())));
  EXPECT_NEAR(head_angle(neg), -5.0, 0.5);
}

TEST(HeadAngle, IsotropicForegroundWarns) {
  Volume v({32, 32, 8}, {});
  for (std::int64_t z = 0; z < 8; ++z) {
    for (std::int64_t y = 0; y < 32; ++y) {
      for (std::int64_t x = 0; x < 32; ++x) {
        if (std::hypot(x - 15.5, y - 15.5) < 10.0) v(x, y, z) = 0.6F;
      }
    }
  }
  const auto h = head_angle_detail(v);
  EXPECT_EQ(h.degrees, 0.0);
  EXPECT_FALSE(h.warnings.empty());
}

TEST(HeadAngle, EmptyVolumeRejected) {
  EXPECT_THROW((void)head_angle(Volume({8, 8, 4}, {})), DegenerateInput);
}

TEST(PrincipalAxis, TiltSign) {
  // Upright ellipse rotated by +10 degrees (x towards y); the major axis tilts by the same angle.
  Grid2<std::uint8_t> m({64, 64}, 0);
  const double t = 10.0 * std::numbers::pi / 180.0;
  for (std::int64_t y = 0; y < 64; ++y) {
    for (std::int64_t x = 0; x < 64; ++x) {
      const double dx = x - 31.5;
      const double dy = y - 31.5;
      // Content rotation by +t of an upright ellipse (semi-axes 10 along x, 25 along y).
      const double ux = std::cos(t) * dx + std::sin(t) * dy;
      const double uy = -std::sin(t) * dx + std::cos(t) * dy;
      if ((ux * ux) / 100.0 + (uy * uy) / 625.0 <= 1.0) m(x, y) = 1;
    }
  }
  EXPECT_NEAR(principal_axis(m).degrees, 10.0, 0.5);
}

TEST(Report, MasksOmittedLeavesStructuralColumnsEmpty) {
  const auto p = make_phantom(PhantomSpec::standard({32, 32, 8}));
  const auto rep = evaluate_volume("v", p.volume, p.volume, {}, {}, std::nullopt);
  EXPECT_FALSE(rep.pv_vent || rep.pv_wml || rep.dv_brain || rep.ssd || rep.delta_ssd || rep.dsc);
  ASSERT_TRUE(rep.mi && rep.r && rep.pwa_total && rep.maid && rep.maid_zp && rep.head_angle);
  EXPECT_EQ(*rep.pwa_total, 0.0);
  EXPECT_NEAR(*rep.r, 1.0, 1e-12);
  EXPECT_EQ(*rep.maid, 0.0);
  // With m == f the mutual information is the entropy of f.
  const auto h = histogram(p.volume);
  double entropy = 0.0;
  for (double q : h.bins) entropy -= q > 0 ? q * std::log2(q) : 0.0;
  EXPECT_NEAR(*rep.mi, entropy, 1e-9);
  const auto row = report_row(rep);
  const std::string header = kReportHeader;
  EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(header.begin(), header.end(), ','));
}

TEST(Report, MetricFailureBecomesNote) {
  const auto p = make_phantom(PhantomSpec::standard({32, 32, 8}));
  StructureMasks reg;
  reg.brain = p.brain;
  reg.vent = LabelMask(p.brain.dims(), p.brain.spacing());
  const auto rep = evaluate_volume("v", p.volume, p.volume, reg, {}, std::nullopt);
  EXPECT_FALSE(rep.ssd);
  EXPECT_TRUE(rep.pv_vent);
  EXPECT_NE(rep.error.find("ssd"), std::string::npos);
  EXPECT_FALSE(rep.failed);
}
