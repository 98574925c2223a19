#pragma once

#include <optional>

#include "gslam/core.hpp"

namespace gslam {

/// Pinhole model. Pixel convention: origin at the top-left pixel, pixel
/// centers at integer coordinates, u rightward, v downward.
struct CameraIntrinsics {
  double fx = 0.0;
  double fy = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 0;
  int height = 0;
  std::optional<double> baseline;  // stereo baseline [m], only for project_stereo
  double depth_scale = 5000.0;     // raw depth units per meter

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw ConfigError("intrinsics: focal lengths must be positive");
    if (!(cx > 0.0 && cx < width) || !(cy > 0.0 && cy < height))
      throw ConfigError("intrinsics: principal point must lie inside the image");
    if (!(depth_scale > 0.0)) throw ConfigError("intrinsics: depth_scale must be positive");
  }
};

struct PixelPoint {
  double u = 0.0;
  double v = 0.0;
  std::optional<double> u_right;  // horizontal coordinate in the right stereo image
};

/// Rigid transform mapping world coordinates to camera coordinates:
/// X_cam = R * X_world + t. Stored trajectories use the inverse
/// (camera-to-world) convention.
struct Pose {
  Quat rotation = Quat::identity();
  Vec3 translation{0, 0, 0};

  static Pose identity() { return {}; }

  Vec3 transform(Vec3 x) const { return rotation.rotate(x) + translation; }

  Pose inverse() const {
    const Quat qi = rotation.conjugate();
    return {qi, -qi.rotate(translation)};
  }

  /// this ∘ other: apply `other`, then `*this`.
  Pose compose(const Pose& other) const {
    return {(rotation * other.rotation).normalized(), rotation.rotate(other.translation) + translation};
  }

  /// Left axis-angle perturbation of the rotation; translation untouched.
  /// Keeps updates on the unit-quaternion manifold.
  Pose perturbed_rotation(Vec3 axis_angle) const {
    return {(Quat::from_axis_angle(axis_angle) * rotation).normalized(), translation};
  }
};

inline Pose operator*(const Pose& a, const Pose& b) { return a.compose(b); }

inline Vec3 transform_point(const Pose& t, Vec3 x) { return t.transform(x); }

/// Monocular pinhole projection of a camera-frame point.
inline PixelPoint project_mono(Vec3 x, const CameraIntrinsics& k) {
  if (!(x.z > 0.0)) throw BehindCameraError("project_mono: point has non-positive depth");
  return {k.fx * x.x / x.z + k.cx, k.fy * x.y / x.z + k.cy, std::nullopt};
}

/// Rectified stereo projection; third coordinate is the column in the right
/// image, offset by the baseline.
inline PixelPoint project_stereo(Vec3 x, const CameraIntrinsics& k) {
  if (!k.baseline) throw ConfigError("project_stereo: stereo baseline is not set");
  if (!(x.z > 0.0)) throw BehindCameraError("project_stereo: point has non-positive depth");
  PixelPoint p = project_mono(x, k);
  p.u_right = k.fx * (x.x - *k.baseline) / x.z + k.cx;
  return p;
}

/// Inverse of project_mono along the pixel ray at the given depth.
inline Vec3 unproject(const PixelPoint& p, double depth, const CameraIntrinsics& k) {
  if (!(depth > 0.0)) throw InvalidDepthError("unproject: depth must be positive");
  return {(p.u - k.cx) / k.fx * depth, (p.v - k.cy) / k.fy * depth, depth};
}

}  // namespace gslam
