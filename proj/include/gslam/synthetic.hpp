#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include "gslam/render.hpp"
#include "gslam/tum_dataset.hpp"

namespace gslam {

enum class MotionProfile { kOrbit, kDolly, kRotationHeavy };

inline MotionProfile motion_profile_from_string(const std::string& s) {
  if (s == "orbit") return MotionProfile::kOrbit;
  if (s == "dolly") return MotionProfile::kDolly;
  if (s == "rotation") return MotionProfile::kRotationHeavy;
  throw ConfigError("unknown motion profile: " + s);
}

struct SyntheticSpec {
  std::uint64_t seed = 1;
  int n_primitives = 500;
  int n_frames = 60;
  MotionProfile profile = MotionProfile::kOrbit;
  double span_degrees = 360.0;   // orbit arc / yaw sweep
  double dolly_distance = 0.5;   // meters, dolly profile
  double fps = 30.0;
  CameraIntrinsics intrinsics{64.0, 64.0, 32.0, 32.0, 64, 64, std::nullopt, 5000.0};
  double depth_valid_tau = 0.5;  // silhouette level below which synthetic depth reads invalid
};

/// A self-rendered scene: ground-truth primitives plus a ground-truth
/// trajectory. Frames produced from it give SLAM a stream whose optimum is
/// exactly known.
struct SyntheticScene {
  SyntheticSpec spec;
  GaussianMap map;
  Trajectory ground_truth;  // camera-to-world
  CameraIntrinsics intrinsics;
};

namespace detail {

/// Camera-to-world rotation looking from `pos` toward `target`, image-down
/// aligned with world +y.
inline Mat3 look_at(Vec3 pos, Vec3 target) {
  const Vec3 z = normalized(target - pos);
  const Vec3 x = normalized(cross(Vec3{0, 1, 0}, z));
  const Vec3 y = cross(z, x);
  Mat3 r;
  for (int i = 0; i < 3; ++i) {
    r.m[i][0] = x[i];
    r.m[i][1] = y[i];
    r.m[i][2] = z[i];
  }
  return r;
}

inline Pose camera_to_world(const Mat3& rot, Vec3 pos) {
  return {quat_from_matrix(rot), pos};
}

}  // namespace detail

/// Deterministic per seed: primitives sampled in a 2x2x2 m box 1-3 m in
/// front of the start pose, trajectory per profile starting at the identity.
inline SyntheticScene generate_synthetic(const SyntheticSpec& spec) {
  if (spec.n_primitives < 1) throw ConfigError("synthetic: n_primitives must be >= 1");
  if (spec.n_frames < 2) throw ConfigError("synthetic: n_frames must be >= 2");

  SyntheticScene scene;
  scene.spec = spec;
  scene.intrinsics = spec.intrinsics;

  Rng rng(spec.seed);
  for (int i = 0; i < spec.n_primitives; ++i) {
    GaussianPrimitive p;
    p.center = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(1.0, 3.0)};
    p.radius = rng.uniform(0.08, 0.20);
    p.opacity = rng.uniform(0.7, 0.98);
    p.color = {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
    scene.map.add(p, 0);
  }

  const Vec3 scene_center{0, 0, 2};
  const double span = spec.span_degrees * 3.14159265358979323846 / 180.0;
  for (int i = 0; i < spec.n_frames; ++i) {
    const double t = static_cast<double>(i) / (spec.n_frames - 1);
    const double ts = i / spec.fps;
    switch (spec.profile) {
      case MotionProfile::kOrbit: {
        const double a = span * t;
        // Rotate the start offset (0,0,-2) about world +y through the center.
        const Vec3 offset{-2.0 * std::sin(a), 0.0, -2.0 * std::cos(a)};
        const Vec3 pos = scene_center + offset;
        scene.ground_truth.append(ts, detail::camera_to_world(detail::look_at(pos, scene_center), pos));
        break;
      }
      case MotionProfile::kDolly: {
        const Vec3 pos{0, 0, spec.dolly_distance * t};
        scene.ground_truth.append(ts, Pose{Quat::identity(), pos});
        break;
      }
      case MotionProfile::kRotationHeavy: {
        const double a = span * t;
        Mat3 yaw;
        yaw.m[0][0] = std::cos(a);
        yaw.m[0][2] = std::sin(a);
        yaw.m[2][0] = -std::sin(a);
        yaw.m[2][2] = std::cos(a);
        yaw.m[1][1] = 1.0;
        scene.ground_truth.append(ts, detail::camera_to_world(yaw, Vec3{0, 0, 0}));
        break;
      }
    }
  }
  return scene;
}

/// Renders frame i of the scene: rgb is the composited image, depth is the
/// normalized render depth where coverage exceeds depth_valid_tau and 0
/// (invalid) elsewhere, mimicking a sensor with dropouts.
inline Frame render_synthetic_frame(const SyntheticScene& scene, std::size_t i, int threads = 1) {
  const Trajectory::Entry& e = scene.ground_truth.entries.at(i);
  RenderOptions opt;
  opt.threads = threads;
  opt.with_cache = false;
  const RenderOutput out = render(scene.map, e.pose.inverse(), scene.intrinsics, opt);
  Frame f;
  f.timestamp = e.timestamp;
  f.rgb = out.rgb;
  f.depth = out.normalized_depth_image(scene.spec.depth_valid_tau);
  return f;
}

/// Writes the rendered stream as a TUM-RGBD directory (rgb/, depth/, index
/// files, groundtruth.txt) plus an intrinsics.json sidecar, so external
/// tools and the dataset loader can consume synthetic scenes unchanged.
inline void export_tum_layout(const SyntheticScene& scene, const std::filesystem::path& dir,
                              int threads = 1) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "rgb");
  fs::create_directories(dir / "depth");

  std::ofstream rgb_idx(dir / "rgb.txt");
  std::ofstream depth_idx(dir / "depth.txt");
  rgb_idx << "# timestamp filename\n";
  depth_idx << "# timestamp filename\n";

  char name[64];
  for (std::size_t i = 0; i < scene.ground_truth.size(); ++i) {
    const Frame f = render_synthetic_frame(scene, i, threads);
    std::snprintf(name, sizeof(name), "%.6f.png", f.timestamp);
    write_png_rgb8(dir / "rgb" / name, f.rgb);
    write_png_gray16(dir / "depth" / name, f.depth, scene.intrinsics.depth_scale);
    char ts[32];
    std::snprintf(ts, sizeof(ts), "%.6f", f.timestamp);
    rgb_idx << ts << " rgb/" << name << '\n';
    depth_idx << ts << " depth/" << name << '\n';
  }
  save_tum_trajectory(scene.ground_truth, dir / "groundtruth.txt");

  std::ofstream meta(dir / "intrinsics.json");
  meta << "{\n  \"fx\": " << scene.intrinsics.fx << ",\n  \"fy\": " << scene.intrinsics.fy
       << ",\n  \"cx\": " << scene.intrinsics.cx << ",\n  \"cy\": " << scene.intrinsics.cy
       << ",\n  \"width\": " << scene.intrinsics.width
       << ",\n  \"height\": " << scene.intrinsics.height
       << ",\n  \"depth_scale\": " << scene.intrinsics.depth_scale << "\n}\n";
}

}  // namespace gslam
