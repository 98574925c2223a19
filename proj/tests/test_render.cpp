#include <gtest/gtest.h>

#include <algorithm>

#include "gslam/render.hpp"
#include "test_support.hpp"

using namespace gslam;

namespace {
const CameraIntrinsics kCam{64.0, 64.0, 32.0, 32.0, 64, 64, std::nullopt, 5000.0};

ProjectedGaussian projected_at(Vec2 center, double radius2d, double opacity) {
  ProjectedGaussian g;
  g.center2d = center;
  g.radius2d = radius2d;
  g.opacity = opacity;
  g.depth = 1.0;
  return g;
}
}  // namespace

TEST(EvalWeight, CenterEqualsOpacity) {
  const auto g = projected_at({10, 10}, 2.0, 0.7);
  EXPECT_DOUBLE_EQ(eval_weight(g, {10, 10}), 0.7);
}

TEST(EvalWeight, OneSigmaValue) {
  const auto g = projected_at({10, 10}, 2.0, 1.0);
  EXPECT_NEAR(eval_weight(g, {12, 10}), std::exp(-0.5), 1e-15);
}

TEST(EvalWeight, ZeroOpacityIsZeroEverywhere) {
  const auto g = projected_at({10, 10}, 2.0, 0.0);
  for (double u = 0; u < 20; u += 0.7) EXPECT_DOUBLE_EQ(eval_weight(g, {u, 10.0}), 0.0);
}

TEST(EvalWeight, ExactlyZeroBeyondCutoff) {
  const auto g = projected_at({10, 10}, 2.0, 1.0);
  EXPECT_GT(eval_weight(g, {10.0 + 5.999, 10.0}), 0.0);
  EXPECT_EQ(eval_weight(g, {10.0 + 6.001, 10.0}), 0.0);
  EXPECT_EQ(eval_weight(g, {40.0, 40.0}), 0.0);
}

TEST(ProjectGaussian, OnePixelRadiusRule) {
  const CameraIntrinsics k{600.0, 600.0, 320.0, 240.0, 640, 480, std::nullopt, 5000.0};
  const GaussianPrimitive g{{0, 0, 2}, 2.0 / 600.0, 0.5, {1, 1, 1}};
  const auto p = project_gaussian(g, Pose::identity(), k);
  ASSERT_TRUE(p.has_value());
  EXPECT_DOUBLE_EQ(p->center2d.x, 320.0);
  EXPECT_DOUBLE_EQ(p->center2d.y, 240.0);
  EXPECT_DOUBLE_EQ(p->radius2d, 1.0);
  EXPECT_DOUBLE_EQ(p->depth, 2.0);
}

TEST(ProjectGaussian, BehindCameraIsCulled) {
  const GaussianPrimitive g{{0, 0, -1}, 0.05, 0.5, {1, 1, 1}};
  EXPECT_FALSE(project_gaussian(g, Pose::identity(), kCam).has_value());
}

TEST(ProjectGaussian, DoublingDepthHalvesRadius) {
  GaussianPrimitive g{{0, 0, 2}, 0.05, 0.5, {1, 1, 1}};
  const auto near = project_gaussian(g, Pose::identity(), kCam);
  g.center.z = 4.0;
  const auto far = project_gaussian(g, Pose::identity(), kCam);
  EXPECT_DOUBLE_EQ(near->radius2d, 2.0 * far->radius2d);
}

TEST(Render, EmptyMapGivesBackground) {
  const RenderOutput out = render(GaussianMap{}, Pose::identity(), kCam);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      EXPECT_EQ(out.rgb.at(x, y, 0), 0.0);
      EXPECT_EQ(out.rgb.at(x, y, 1), 0.0);
      EXPECT_EQ(out.rgb.at(x, y, 2), 0.0);
      EXPECT_EQ(out.depth.at(x, y), 0.0);
      EXPECT_EQ(out.silhouette.at(x, y), 0.0);
      EXPECT_TRUE(out.contributors(x, y).empty());
    }
}

TEST(Render, SingleOpaqueContributor) {
  GaussianMap map;
  map.add({{0, 0, 2}, 0.2, 1.0, {1, 0, 0}}, 0);  // projects to the principal point
  const RenderOutput out = render(map, Pose::identity(), kCam);
  EXPECT_DOUBLE_EQ(out.rgb.at(32, 32, 0), 1.0);
  EXPECT_DOUBLE_EQ(out.rgb.at(32, 32, 1), 0.0);
  EXPECT_DOUBLE_EQ(out.depth.at(32, 32), 2.0);
  EXPECT_DOUBLE_EQ(out.silhouette.at(32, 32), 1.0);
}

TEST(Render, TwoContributorHandComputedCompositing) {
  GaussianMap map;
  map.add({{0, 0, 1}, 0.2, 0.5, {1, 0, 0}}, 0);  // f=0.5 at the center pixel
  map.add({{0, 0, 2}, 0.4, 1.0, {0, 1, 0}}, 1);  // f=1 behind it
  const RenderOutput out = render(map, Pose::identity(), kCam);
  EXPECT_DOUBLE_EQ(out.rgb.at(32, 32, 0), 0.5);
  EXPECT_DOUBLE_EQ(out.rgb.at(32, 32, 1), 0.5);
  EXPECT_DOUBLE_EQ(out.rgb.at(32, 32, 2), 0.0);
  EXPECT_DOUBLE_EQ(out.depth.at(32, 32), 0.5 * 1.0 + 1.0 * 2.0 * 0.5);
  EXPECT_DOUBLE_EQ(out.silhouette.at(32, 32), 1.0);
  const auto contribs = out.contributors(32, 32);
  ASSERT_EQ(contribs.size(), 2u);
  EXPECT_EQ(contribs[0].first, 0);  // depth-sorted: near first
  EXPECT_EQ(contribs[1].first, 1);
}

TEST(Render, SilhouetteZeroExactlyWhereNoContributors) {
  Rng rng(5);
  const GaussianMap map = testsup::random_scene(rng, 30);
  const RenderOutput out = render(map, Pose::identity(), kCam);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const bool empty = out.contributors(x, y).empty();
      EXPECT_EQ(empty, out.silhouette.at(x, y) == 0.0);
    }
}

TEST(Render, TelescopingIdentityOverContributors) {
  // S accumulated as sum f_i T_i must equal the product form 1 - prod(1-f_i)
  // over the same contributor sequence: two algebraic routes to one value.
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const GaussianMap map = testsup::random_scene(rng, 60);
    const RenderOutput out = render(map, Pose::identity(), kCam);
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 64; ++x) {
        double product = 1.0;
        for (const auto& [idx, f] : out.contributors(x, y)) product *= (1.0 - f);
        EXPECT_NEAR(out.silhouette.at(x, y), 1.0 - product, 1e-6);
      }
  }
}

TEST(Render, EarlyTerminationPerturbsSilhouetteBelowThreshold) {
  Rng rng(19);
  for (int trial = 0; trial < 5; ++trial) {
    const GaussianMap map = testsup::random_scene(rng, 150);
    RenderOptions exact;
    exact.transmittance_min = 0.0;
    const RenderOutput full = render(map, Pose::identity(), kCam, exact);
    const RenderOutput fast = render(map, Pose::identity(), kCam);
    for (std::size_t i = 0; i < full.silhouette.data.size(); ++i)
      EXPECT_NEAR(full.silhouette.data[i], fast.silhouette.data[i], kTransmittanceMin);
  }
}

TEST(Render, SilhouetteInUnitIntervalAndMonotoneUnderAppend) {
  Rng rng(23);
  RenderOptions exact;
  exact.transmittance_min = 0.0;  // isolate the compositing algebra
  GaussianMap map = testsup::random_scene(rng, 40);
  RenderOutput prev = render(map, Pose::identity(), kCam, exact);
  for (int step = 0; step < 5; ++step) {
    GaussianPrimitive extra;
    extra.center = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(1.0, 3.0)};
    extra.radius = rng.uniform(0.05, 0.2);
    extra.opacity = rng.uniform(0.1, 0.9);
    extra.color = {0.5, 0.5, 0.5};
    map.add(extra, 0);
    const RenderOutput cur = render(map, Pose::identity(), kCam, exact);
    for (std::size_t i = 0; i < cur.silhouette.data.size(); ++i) {
      EXPECT_GE(cur.silhouette.data[i], 0.0);
      EXPECT_LE(cur.silhouette.data[i], 1.0);
      EXPECT_GE(cur.silhouette.data[i], prev.silhouette.data[i] - 1e-12);
    }
    prev = cur;
  }
}

TEST(Render, TiledMatchesNaiveBitExactly) {
  Rng rng(29);
  for (int trial = 0; trial < 25; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(200));
    const GaussianMap map = testsup::random_scene(rng, n);
    const Pose pose = testsup::random_small_pose(rng);
    RenderOptions opt;
    opt.threads = 1 + static_cast<int>(rng.uniform_index(3));
    const RenderOutput tiled = render(map, pose, kCam, opt);
    const RenderOutput naive = render_naive(map, pose, kCam);
    ASSERT_EQ(tiled.rgb.data.size(), naive.rgb.data.size());
    for (std::size_t i = 0; i < tiled.rgb.data.size(); ++i)
      ASSERT_EQ(tiled.rgb.data[i], naive.rgb.data[i]);
    for (std::size_t i = 0; i < tiled.depth.data.size(); ++i) {
      ASSERT_EQ(tiled.depth.data[i], naive.depth.data[i]);
      ASSERT_EQ(tiled.silhouette.data[i], naive.silhouette.data[i]);
    }
  }
}

TEST(Render, ThreadCountDoesNotChangeOutput) {
  Rng rng(31);
  const GaussianMap map = testsup::random_scene(rng, 120);
  const Pose pose = testsup::random_small_pose(rng);
  RenderOptions one, four;
  one.threads = 1;
  four.threads = 4;
  const RenderOutput a = render(map, pose, kCam, one);
  const RenderOutput b = render(map, pose, kCam, four);
  for (std::size_t i = 0; i < a.rgb.data.size(); ++i) ASSERT_EQ(a.rgb.data[i], b.rgb.data[i]);
  for (std::size_t i = 0; i < a.depth.data.size(); ++i) {
    ASSERT_EQ(a.depth.data[i], b.depth.data[i]);
    ASSERT_EQ(a.silhouette.data[i], b.silhouette.data[i]);
  }
}

TEST(Render, StorageOrderInvariantForDistinctDepths) {
  Rng rng(37);
  GaussianMap map = testsup::random_scene(rng, 50);
  for (std::size_t i = 0; i < map.size(); ++i)
    map.primitives[i].center.z = 1.0 + 0.03 * static_cast<double>(i);  // distinct depths

  GaussianMap shuffled;
  std::vector<std::size_t> order(map.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  for (std::size_t i : order) shuffled.add(map.primitives[i], 0);

  const RenderOutput a = render(map, Pose::identity(), kCam);
  const RenderOutput b = render(shuffled, Pose::identity(), kCam);
  for (std::size_t i = 0; i < a.rgb.data.size(); ++i)
    EXPECT_NEAR(a.rgb.data[i], b.rgb.data[i], 1e-6);
  for (std::size_t i = 0; i < a.depth.data.size(); ++i) {
    EXPECT_NEAR(a.depth.data[i], b.depth.data[i], 1e-6);
    EXPECT_NEAR(a.silhouette.data[i], b.silhouette.data[i], 1e-6);
  }
}

TEST(Render, NormalizedDepthGatesOnSilhouette) {
  GaussianMap map;
  map.add({{0, 0, 2}, 0.05, 0.4, {1, 1, 1}}, 0);  // partial coverage
  const RenderOutput out = render(map, Pose::identity(), kCam);
  const double s = out.silhouette.at(32, 32);
  ASSERT_GT(s, 0.0);
  ASSERT_LT(s, 0.99);
  // Raw depth underestimates; the normalized value recovers the surface.
  EXPECT_LT(out.depth.at(32, 32), 2.0);
  EXPECT_NEAR(out.normalized_depth(32, 32, 0.1), 2.0, 1e-9);
  EXPECT_EQ(out.normalized_depth(32, 32, 0.99), 0.0);
}
