#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "gslam/losses.hpp"
#include "gslam/render_backward.hpp"

namespace gslam {

/// A frame promoted to supervise map optimization. The pose is pinned at
/// selection time; mapping never re-optimizes it.
struct Keyframe {
  Frame frame;
  Pose pose;  // world-to-camera, as tracked
  std::int64_t index = 0;
};

struct MappingConfig {
  double parallax_threshold = 15.0;  // pixels
  int grid_stride = 8;               // sampling stride for the parallax grid
  int map_iters = 60;                // gradient steps per keyframe event
  double lr_center = 1e-4;
  double lr_radius = 5e-4;
  double lr_opacity = 5e-2;
  double lr_color = 2.5e-3;
  int window_size = 8;      // keyframes jointly optimized
  bool backtracking = true; // halve step sizes when an epoch raises the loss
  LossWeights weights;
  int threads = 1;

  void validate() const {
    if (!(parallax_threshold > 0.0)) throw ConfigError("mapping: parallax_threshold must be > 0");
    if (map_iters < 1) throw ConfigError("mapping: map_iters must be >= 1");
    if (window_size < 1) throw ConfigError("mapping: window_size must be >= 1");
    if (grid_stride < 1) throw ConfigError("mapping: grid_stride must be >= 1");
  }
};

/// Mean screen-space motion between a keyframe and the current view,
/// measured by reprojecting a regular grid of the keyframe's valid-depth
/// pixels through the relative pose. Samples that leave the current frame or
/// end up behind the camera are dropped.
inline double average_parallax(const Keyframe& kf, const Frame& current, const Pose& current_pose,
                               const CameraIntrinsics& k, int grid_stride = 8) {
  (void)current;  // geometry only depends on the keyframe content and the poses
  const Pose relative = current_pose * kf.pose.inverse();  // keyframe camera -> current camera
  double sum = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < kf.frame.depth.height; y += grid_stride) {
    for (int x = 0; x < kf.frame.depth.width; x += grid_stride) {
      const double z = kf.frame.depth.at(x, y);
      if (!(z > 0.0)) continue;
      const Vec3 in_current =
          relative.transform(unproject({static_cast<double>(x), static_cast<double>(y)}, z, k));
      if (!(in_current.z > 0.0)) continue;
      const PixelPoint p = project_mono(in_current, k);
      if (p.u < 0.0 || p.u > k.width - 1 || p.v < 0.0 || p.v > k.height - 1) continue;
      const double du = p.u - x;
      const double dv = p.v - y;
      sum += std::sqrt(du * du + dv * dv);
      ++count;
    }
  }
  if (count == 0)
    throw DegenerateParallaxError("average_parallax: no reprojectable samples");
  return sum / static_cast<double>(count);
}

/// True when the view has moved far enough from the latest keyframe, or when
/// no keyframe exists yet. A degenerate parallax measurement also promotes
/// the frame: losing all samples means the view changed drastically.
inline bool select_keyframe(const Keyframe* latest, const Frame& current, const Pose& current_pose,
                            const CameraIntrinsics& k, const MappingConfig& cfg) {
  if (latest == nullptr) return true;
  try {
    return average_parallax(*latest, current, current_pose, k, cfg.grid_stride) >
           cfg.parallax_threshold;
  } catch (const DegenerateParallaxError&) {
    return true;
  }
}

namespace detail {

/// Per-group RMS of a gradient set, used to normalize step sizes: the raw
/// per-primitive gradients of a mean-normalized loss shrink with the pixel
/// count, so fixed learning rates alone would barely move any parameter.
struct GradientScales {
  double center = 0.0, radius = 0.0, opacity = 0.0, color = 0.0;
};

inline GradientScales gradient_rms(const GradientSet& g) {
  GradientScales s;
  const double n = static_cast<double>(std::max<std::size_t>(g.size(), 1));
  double c = 0, r = 0, o = 0, col = 0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    c += dot(g.d_center[i], g.d_center[i]);
    r += g.d_radius[i] * g.d_radius[i];
    o += g.d_opacity[i] * g.d_opacity[i];
    col += dot(g.d_color[i], g.d_color[i]);
  }
  s.center = std::sqrt(c / (3.0 * n));
  s.radius = std::sqrt(r / n);
  s.opacity = std::sqrt(o / n);
  s.color = std::sqrt(col / (3.0 * n));
  return s;
}

inline double window_mean_loss(const GaussianMap& map, std::span<const Keyframe> window,
                               const CameraIntrinsics& k, const MappingConfig& cfg) {
  RenderOptions opt;
  opt.threads = cfg.threads;
  opt.with_cache = false;
  double sum = 0.0;
  for (const Keyframe& kf : window) {
    const RenderOutput out = render(map, kf.pose, k, opt);
    sum += photometric_depth_loss(out, kf.frame, cfg.weights, /*gate=*/false).loss;
  }
  return sum / static_cast<double>(window.size());
}

}  // namespace detail

/// Fixed-pose scene refinement: round-robin gradient steps on the primitive
/// parameters against the keyframes in the window. Poses are never touched.
/// Every valid-depth pixel supervises (no silhouette gate), so freshly
/// densified primitives receive gradients immediately. Parameter clamps run
/// after each step. Returns the final mean loss over the window.
inline double optimize_scene(GaussianMap& map, std::span<const Keyframe> window,
                             const CameraIntrinsics& k, const MappingConfig& cfg) {
  cfg.validate();
  if (window.empty()) throw ConfigError("optimize_scene: empty keyframe window");
  if (map.empty()) throw ConfigError("optimize_scene: map is empty");

  double lr_center = cfg.lr_center;
  double lr_radius = cfg.lr_radius;
  double lr_opacity = cfg.lr_opacity;
  double lr_color = cfg.lr_color;

  std::vector<GaussianPrimitive> snapshot;
  double prev_epoch_loss = std::numeric_limits<double>::infinity();
  if (cfg.backtracking) {
    snapshot = map.primitives;
    prev_epoch_loss = detail::window_mean_loss(map, window, k, cfg);
  }

  RenderOptions opt;
  opt.threads = cfg.threads;
  opt.with_cache = true;

  const std::size_t epoch_len = window.size();
  for (int it = 0; it < cfg.map_iters; ++it) {
    const Keyframe& kf = window[static_cast<std::size_t>(it) % epoch_len];
    const RenderOutput out = render(map, kf.pose, k, opt);

    PixelGradients pg;
    const LossValue lv = photometric_depth_loss(out, kf.frame, cfg.weights, /*gate=*/false, &pg);
    if (lv.pixels > 0) {
      const GradientSet g =
          render_backward(out, pg.d_rgb, pg.d_depth, pg.d_silhouette, map.size(), cfg.threads);
      const detail::GradientScales rms = detail::gradient_rms(g);
      const double sc = lr_center / (rms.center + 1e-12);
      const double sr = lr_radius / (rms.radius + 1e-12);
      const double so = lr_opacity / (rms.opacity + 1e-12);
      const double scol = lr_color / (rms.color + 1e-12);
      for (std::size_t i = 0; i < map.size(); ++i) {
        GaussianPrimitive& p = map.primitives[i];
        p.center -= sc * g.d_center[i];
        p.radius -= sr * g.d_radius[i];
        p.opacity -= so * g.d_opacity[i];
        p.color -= scol * g.d_color[i];
        p.clamp_to_valid();
      }
    }

    if (cfg.backtracking && (static_cast<std::size_t>(it) + 1) % epoch_len == 0) {
      const double mean = detail::window_mean_loss(map, window, k, cfg);
      if (mean > prev_epoch_loss) {
        map.primitives = snapshot;
        lr_center *= 0.5;
        lr_radius *= 0.5;
        lr_opacity *= 0.5;
        lr_color *= 0.5;
      } else {
        snapshot = map.primitives;
        prev_epoch_loss = mean;
      }
    }
  }

  return detail::window_mean_loss(map, window, k, cfg);
}

}  // namespace gslam
