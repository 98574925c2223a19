#pragma once

#include <algorithm>
#include <utility>
#include <vector>

#include "gslam/geometry.hpp"
#include "gslam/image.hpp"

namespace gslam {

/// One RGB-D observation. rgb in [0,1], depth in meters with 0 = invalid.
struct Frame {
  double timestamp = 0.0;
  ImageD rgb;    // H x W x 3
  ImageD depth;  // H x W x 1

  bool depth_valid(int x, int y) const { return depth.at(x, y) > 0.0; }
};

/// Downscales a frame by an integer factor: RGB is box-averaged per block,
/// depth takes the median of the block's valid samples (0 when none are).
/// Use together with decimate_intrinsics so projections stay consistent.
inline Frame decimate_frame(const Frame& f, int factor) {
  if (factor <= 1) return f;
  Frame out;
  out.timestamp = f.timestamp;
  const int w = f.rgb.width / factor;
  const int h = f.rgb.height / factor;
  out.rgb = ImageD(w, h, 3);
  out.depth = ImageD(w, h, 1);
  std::vector<double> depths;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc[3] = {0, 0, 0};
      depths.clear();
      for (int dy = 0; dy < factor; ++dy)
        for (int dx = 0; dx < factor; ++dx) {
          const int sx = x * factor + dx;
          const int sy = y * factor + dy;
          for (int c = 0; c < 3; ++c) acc[c] += f.rgb.at(sx, sy, c);
          const double z = f.depth.at(sx, sy);
          if (z > 0.0) depths.push_back(z);
        }
      const double inv = 1.0 / (factor * factor);
      for (int c = 0; c < 3; ++c) out.rgb.at(x, y, c) = acc[c] * inv;
      if (!depths.empty()) {
        std::nth_element(depths.begin(), depths.begin() + depths.size() / 2, depths.end());
        out.depth.at(x, y) = depths[depths.size() / 2];
      }
    }
  }
  return out;
}

inline CameraIntrinsics decimate_intrinsics(const CameraIntrinsics& k, int factor) {
  if (factor <= 1) return k;
  CameraIntrinsics out = k;
  const double off = (factor - 1) / 2.0;  // block centers, in source pixel units
  out.fx = k.fx / factor;
  out.fy = k.fy / factor;
  out.cx = (k.cx - off) / factor;
  out.cy = (k.cy - off) / factor;
  out.width = k.width / factor;
  out.height = k.height / factor;
  return out;
}

/// Timestamped camera-to-world poses, strictly increasing in time.
struct Trajectory {
  struct Entry {
    double timestamp = 0.0;
    Pose pose;  // camera-to-world
  };

  std::vector<Entry> entries;

  void append(double timestamp, const Pose& camera_to_world) {
    if (!entries.empty() && !(timestamp > entries.back().timestamp))
      throw ConfigError("trajectory: timestamps must be strictly increasing");
    entries.push_back({timestamp, camera_to_world});
  }

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
};

}  // namespace gslam
