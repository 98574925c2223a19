#pragma once

#include "gslam/gaussian_map.hpp"
#include "gslam/render.hpp"

namespace gslam {

struct DensifyThresholds {
  double tau_add = 0.5;     // silhouette below this marks an unexplained pixel
  double delta_add = 0.05;  // relative depth error above this marks a bad surface
};

/// Adds one primitive per keyframe pixel the current map fails to explain:
/// either the silhouette is low (new region) or the rendered depth disagrees
/// with the sensor depth (wrong surface). New primitives follow the same
/// rule as first-frame initialization, unprojected at the estimated pose.
/// Returns the number added; zero is a valid outcome.
inline std::size_t densify(GaussianMap& map, const Frame& frame, const Pose& pose,
                           const RenderOutput& rendered, const CameraIntrinsics& k,
                           const DensifyThresholds& th = {}, std::int64_t epoch = 0) {
  if (rendered.width != frame.depth.width || rendered.height != frame.depth.height)
    throw DimensionError("densify: render/frame size mismatch");

  const Pose camera_to_world = pose.inverse();
  std::size_t added = 0;
  for (int y = 0; y < frame.depth.height; ++y) {
    for (int x = 0; x < frame.depth.width; ++x) {
      const double z = frame.depth.at(x, y);
      if (!(z > 0.0)) continue;

      const double s = rendered.silhouette.at(x, y);
      bool uncovered = s < th.tau_add;
      if (!uncovered) {
        const double d_norm = rendered.depth.at(x, y) / s;  // s >= tau_add > 0 here
        uncovered = std::abs(d_norm - z) > th.delta_add * z;
      }
      if (!uncovered) continue;

      GaussianPrimitive p;
      p.center = camera_to_world.transform(
          unproject({static_cast<double>(x), static_cast<double>(y)}, z, k));
      p.color = {frame.rgb.at(x, y, 0), frame.rgb.at(x, y, 1), frame.rgb.at(x, y, 2)};
      p.opacity = 0.5;
      p.radius = z / k.fx;
      map.add(p, epoch);
      ++added;
    }
  }
  return added;
}

}  // namespace gslam
