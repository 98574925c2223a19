#include <gtest/gtest.h>

#include "gslam/geometry.hpp"
#include "test_support.hpp"

using namespace gslam;

namespace {
const CameraIntrinsics kVga{500.0, 500.0, 320.0, 240.0, 640, 480, std::nullopt, 5000.0};

CameraIntrinsics with_baseline(CameraIntrinsics k, double b) {
  k.baseline = b;
  return k;
}
}  // namespace

TEST(ProjectMono, OpticalAxisHitsPrincipalPoint) {
  for (double z : {0.1, 1.0, 2.5, 40.0}) {
    const PixelPoint p = project_mono({0, 0, z}, kVga);
    EXPECT_DOUBLE_EQ(p.u, 320.0);
    EXPECT_DOUBLE_EQ(p.v, 240.0);
  }
}

TEST(ProjectMono, HandEvaluatedPoint) {
  const PixelPoint p = project_mono({1, 2, 4}, kVga);
  EXPECT_DOUBLE_EQ(p.u, 445.0);
  EXPECT_DOUBLE_EQ(p.v, 490.0);
}

TEST(ProjectMono, BehindCameraThrows) {
  EXPECT_THROW(project_mono({0, 0, -1}, kVga), BehindCameraError);
  EXPECT_THROW(project_mono({0, 0, 0}, kVga), BehindCameraError);
}

TEST(ProjectStereo, HandEvaluatedPoint) {
  const PixelPoint p = project_stereo({1, 2, 4}, with_baseline(kVga, 0.1));
  EXPECT_DOUBLE_EQ(p.u, 445.0);
  EXPECT_DOUBLE_EQ(p.v, 490.0);
  ASSERT_TRUE(p.u_right.has_value());
  EXPECT_DOUBLE_EQ(*p.u_right, 432.5);
}

TEST(ProjectStereo, ZeroBaselineDegeneratesToMono) {
  const PixelPoint p = project_stereo({0.3, -0.2, 1.7}, with_baseline(kVga, 0.0));
  EXPECT_DOUBLE_EQ(*p.u_right, p.u);
}

TEST(ProjectStereo, PrincipalRayOffset) {
  const PixelPoint p = project_stereo({0, 0, 2}, with_baseline(kVga, 0.1));
  EXPECT_DOUBLE_EQ(*p.u_right, kVga.cx - kVga.fx * 0.05);
}

TEST(ProjectStereo, Errors) {
  EXPECT_THROW(project_stereo({0, 0, 2}, kVga), ConfigError);
  EXPECT_THROW(project_stereo({0, 0, -2}, with_baseline(kVga, 0.1)), BehindCameraError);
}

TEST(ProjectStereo, FirstTwoRowsMatchMonoExactly) {
  Rng rng(7);
  const CameraIntrinsics ks = with_baseline(kVga, 0.08);
  for (int i = 0; i < 200; ++i) {
    const Vec3 x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(0.1, 10)};
    const PixelPoint m = project_mono(x, kVga);
    const PixelPoint s = project_stereo(x, ks);
    EXPECT_EQ(m.u, s.u);
    EXPECT_EQ(m.v, s.v);
  }
}

TEST(Unproject, PrincipalPointRay) {
  const Vec3 x = unproject({320.0, 240.0}, 3.0, kVga);
  EXPECT_DOUBLE_EQ(x.x, 0.0);
  EXPECT_DOUBLE_EQ(x.y, 0.0);
  EXPECT_DOUBLE_EQ(x.z, 3.0);
}

TEST(Unproject, RoundTripInverse) {
  const Vec3 x = unproject({445.0, 490.0}, 4.0, kVga);
  EXPECT_NEAR(x.x, 1.0, 1e-9);
  EXPECT_NEAR(x.y, 2.0, 1e-9);
  EXPECT_NEAR(x.z, 4.0, 1e-9);
}

TEST(Unproject, NonPositiveDepthThrows) {
  EXPECT_THROW(unproject({445.0, 490.0}, 0.0, kVga), InvalidDepthError);
  EXPECT_THROW(unproject({445.0, 490.0}, -1.0, kVga), InvalidDepthError);
}

TEST(Unproject, ProjectUnprojectIdentityRandomized) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    CameraIntrinsics k;
    k.fx = rng.uniform(100, 900);
    k.fy = rng.uniform(100, 900);
    k.width = 640;
    k.height = 480;
    k.cx = rng.uniform(1.0, k.width - 1.0);
    k.cy = rng.uniform(1.0, k.height - 1.0);
    const PixelPoint p{rng.uniform(0, k.width - 1.0), rng.uniform(0, k.height - 1.0)};
    const double depth = rng.uniform(0.05, 20.0);
    const PixelPoint q = project_mono(unproject(p, depth, k), k);
    EXPECT_NEAR(q.u, p.u, 1e-6);
    EXPECT_NEAR(q.v, p.v, 1e-6);
  }
}

TEST(Pose, IdentityLeavesPointsUnchanged) {
  const Vec3 x{0.3, -1.2, 2.5};
  const Vec3 y = transform_point(Pose::identity(), x);
  EXPECT_DOUBLE_EQ(y.x, x.x);
  EXPECT_DOUBLE_EQ(y.y, x.y);
  EXPECT_DOUBLE_EQ(y.z, x.z);
}

TEST(Pose, InverseRoundTrip) {
  Rng rng(3);
  for (int i = 0; i < 100; ++i) {
    const Pose t = testsup::random_small_pose(rng, 1.5, 2.0);
    const Vec3 x{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    const Vec3 y = t.inverse().transform(t.transform(x));
    EXPECT_NEAR(norm(y - x), 0.0, 1e-9);
    const Pose id = t * t.inverse();
    EXPECT_NEAR(norm(id.translation), 0.0, 1e-9);
    EXPECT_NEAR(std::abs(id.rotation.w), 1.0, 1e-9);
  }
}

TEST(Pose, QuarterTurnAboutZ) {
  Pose t;
  t.rotation = Quat::from_axis_angle({0, 0, M_PI / 2});
  const Vec3 y = transform_point(t, {1, 0, 0});
  EXPECT_NEAR(y.x, 0.0, 1e-9);
  EXPECT_NEAR(y.y, 1.0, 1e-9);
  EXPECT_NEAR(y.z, 0.0, 1e-9);
}

TEST(Pose, RigidTransformPreservesDistances) {
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Pose t = testsup::random_small_pose(rng, 2.0, 3.0);
    const Vec3 a{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const Vec3 b{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    EXPECT_NEAR(norm(t.transform(a) - t.transform(b)), norm(a - b), 1e-9);
  }
}

TEST(Pose, CompositionAssociative) {
  Rng rng(9);
  for (int i = 0; i < 100; ++i) {
    const Pose a = testsup::random_small_pose(rng, 1.0, 1.0);
    const Pose b = testsup::random_small_pose(rng, 1.0, 1.0);
    const Pose c = testsup::random_small_pose(rng, 1.0, 1.0);
    const Vec3 x{rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
    const Vec3 left = ((a * b) * c).transform(x);
    const Vec3 right = (a * (b * c)).transform(x);
    EXPECT_NEAR(norm(left - right), 0.0, 1e-9);
  }
}

TEST(Pose, RenormalizationKeepsRotationWithinTolerance) {
  Rng rng(13);
  Pose t = testsup::random_small_pose(rng, 1.0, 1.0);
  for (int i = 0; i < 2000; ++i) {
    const Vec3 step{rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3), rng.uniform(-1e-3, 1e-3)};
    const Pose updated = t.perturbed_rotation(step);
    EXPECT_NEAR(updated.rotation.norm(), 1.0, 1e-9);
    // Renormalizing must not change the represented rotation measurably.
    const Quat raw = Quat::from_axis_angle(step) * t.rotation;
    const Quat ren = raw.normalized();
    const Vec3 probe{1.0, -0.5, 2.0};
    EXPECT_NEAR(norm(raw.rotate(probe) - ren.rotate(probe)) / norm(probe), 0.0, 1e-9);
    t = updated;
  }
  EXPECT_NEAR(t.rotation.norm(), 1.0, 1e-9);
}

TEST(Intrinsics, ValidateRejectsBadValues) {
  CameraIntrinsics k = kVga;
  EXPECT_NO_THROW(k.validate());
  k.fx = 0.0;
  EXPECT_THROW(k.validate(), ConfigError);
  k = kVga;
  k.cx = 700.0;
  EXPECT_THROW(k.validate(), ConfigError);
  k = kVga;
  k.depth_scale = 0.0;
  EXPECT_THROW(k.validate(), ConfigError);
}
