#pragma once

#include <cstddef>

#include "gslam/frame.hpp"
#include "gslam/render.hpp"

namespace gslam {

struct LossWeights {
  double lambda_color = 0.5;
  double lambda_depth = 1.0;
  double tau_vis = 0.99;  // silhouette level above which a pixel counts as observed
};

struct LossValue {
  double loss = 0.0;
  std::size_t pixels = 0;  // pixels included by the gate
};

/// Per-pixel gradients of the loss with respect to the raw render outputs.
struct PixelGradients {
  ImageD d_rgb;         // H x W x 3
  ImageD d_depth;       // H x W
  ImageD d_silhouette;  // H x W
};

namespace detail {
inline double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }
}

/// Mean per-pixel L1 photometric + L1 depth discrepancy between a render and
/// an observed frame.
///
///   L = (1/M) sum_p [ lc * |C(p)-I(p)|_1 + ld * |D~(p)-Z(p)| ]
///
/// With `gate_by_silhouette`, only pixels where S(p) > tau_vis and the sensor
/// depth is valid are counted (tracking). Without it, every valid-depth pixel
/// participates (mapping), with the depth term dropped where the render has
/// effectively no coverage. Normalized depth D~ = D/S is used throughout.
///
/// Returns pixels = 0 (loss 0) when the gate admits nothing; callers decide
/// whether that is an error.
inline LossValue photometric_depth_loss(const RenderOutput& render, const Frame& frame,
                                        const LossWeights& w, bool gate_by_silhouette,
                                        PixelGradients* grads = nullptr) {
  if (frame.rgb.width != render.width || frame.rgb.height != render.height)
    throw DimensionError("photometric_depth_loss: frame/render size mismatch");

  if (grads) {
    grads->d_rgb = ImageD(render.width, render.height, 3);
    grads->d_depth = ImageD(render.width, render.height, 1);
    grads->d_silhouette = ImageD(render.width, render.height, 1);
  }

  double color_sum = 0.0;
  double depth_sum = 0.0;
  std::size_t included = 0;

  for (int y = 0; y < render.height; ++y) {
    for (int x = 0; x < render.width; ++x) {
      const double z = frame.depth.at(x, y);
      if (!(z > 0.0)) continue;
      const double s = render.silhouette.at(x, y);
      if (gate_by_silhouette && !(s > w.tau_vis)) continue;
      ++included;

      for (int c = 0; c < 3; ++c) {
        const double diff = render.rgb.at(x, y, c) - frame.rgb.at(x, y, c);
        color_sum += std::abs(diff);
        if (grads) grads->d_rgb.at(x, y, c) = w.lambda_color * detail::sgn(diff);
      }

      if (s > kSilhouetteEps) {
        const double d_norm = render.depth.at(x, y) / s;
        const double diff = d_norm - z;
        depth_sum += std::abs(diff);
        if (grads) {
          const double g = w.lambda_depth * detail::sgn(diff);
          grads->d_depth.at(x, y) = g / s;
          grads->d_silhouette.at(x, y) = -g * render.depth.at(x, y) / (s * s);
        }
      }
    }
  }

  if (included == 0) return {0.0, 0};

  const double inv_m = 1.0 / static_cast<double>(included);
  if (grads) {
    for (double& v : grads->d_rgb.data) v *= inv_m;
    for (double& v : grads->d_depth.data) v *= inv_m;
    for (double& v : grads->d_silhouette.data) v *= inv_m;
  }
  return {(w.lambda_color * color_sum + w.lambda_depth * depth_sum) * inv_m, included};
}

}  // namespace gslam
