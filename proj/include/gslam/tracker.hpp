#pragma once

#include <optional>

#include "gslam/losses.hpp"
#include "gslam/render_backward.hpp"

namespace gslam {

struct TrackingConfig {
  int iters_rotation = 2;
  int iters_translation = 2;
  int outer_rounds = 50;
  double lr_rotation = 2e-3;     // axis-angle radians per unit gradient
  double lr_translation = 1e-3;  // meters per unit gradient
  double lr_growth = 2.0;        // step-size growth on an accepted step
  double lr_growth_cap = 32.0;   // growth ceiling, as a multiple of the base step
  LossWeights weights;
  int threads = 1;

  void validate() const {
    if (iters_rotation < 1 || iters_translation < 1 || outer_rounds < 1)
      throw ConfigError("tracking: iteration counts must be >= 1");
    if (weights.lambda_color < 0.0 || weights.lambda_depth < 0.0 ||
        (weights.lambda_color == 0.0 && weights.lambda_depth == 0.0))
      throw ConfigError("tracking: loss weights must be non-negative and not both zero");
    if (!(weights.tau_vis > 0.0 && weights.tau_vis < 1.0))
      throw ConfigError("tracking: tau_vis must lie in (0,1)");
  }
};

struct TrackingResult {
  Pose pose;
  double final_loss = 0.0;
  int iterations_used = 0;
  bool converged = false;
};

/// Raised when the loss diverges; carries the best pose found before losing
/// the frame so the caller can flush partial results.
class TrackingLostError : public Error {
 public:
  TrackingLostError(const std::string& msg, TrackingResult best)
      : Error(msg), best_(std::move(best)) {}
  const TrackingResult& best() const { return best_; }

 private:
  TrackingResult best_;
};

struct TrackingLoss {
  double loss = 0.0;
  std::size_t pixels = 0;
  Vec3 d_rotation;
  Vec3 d_translation;
};

/// Silhouette-gated photometric + depth loss of one frame against the map,
/// with its gradient in the camera pose.
inline TrackingLoss tracking_loss(const GaussianMap& map, const Pose& pose, const Frame& frame,
                                  const CameraIntrinsics& k, const TrackingConfig& cfg) {
  RenderOptions opt;
  opt.threads = cfg.threads;
  opt.with_cache = true;
  const RenderOutput out = render(map, pose, k, opt);

  PixelGradients pixel_grads;
  const LossValue lv = photometric_depth_loss(out, frame, cfg.weights, /*gate=*/true, &pixel_grads);
  if (lv.pixels == 0)
    throw UntrackableFrameError("tracking_loss: no pixel passes the visibility gate");

  const GradientSet g = render_backward(out, pixel_grads.d_rgb, pixel_grads.d_depth,
                                        pixel_grads.d_silhouette, map.size(), cfg.threads);
  return {lv.loss, lv.pixels, g.d_rotation, g.d_translation};
}

namespace detail {

/// Loss without gradients; nullopt when the gate admits no pixel.
inline std::optional<double> tracking_loss_only(const GaussianMap& map, const Pose& pose,
                                                const Frame& frame, const CameraIntrinsics& k,
                                                const TrackingConfig& cfg) {
  RenderOptions opt;
  opt.threads = cfg.threads;
  opt.with_cache = false;
  const RenderOutput out = render(map, pose, k, opt);
  const LossValue lv = photometric_depth_loss(out, frame, cfg.weights, /*gate=*/true, nullptr);
  if (lv.pixels == 0) return std::nullopt;
  return lv.loss;
}

}  // namespace detail

/// Estimates the camera pose of `frame` by inverse rendering, starting from
/// the previous frame's pose. Rotation and translation are optimized in
/// strictly alternating phases: rotation-only steps never touch the
/// translation and vice versa. Each step is plain gradient descent on one
/// parameter group; a step that increases the loss is rejected and that
/// group's step size halved. Returns the best pose observed.
inline TrackingResult track_frame(const GaussianMap& map, const Frame& frame,
                                  const Pose& prev_pose,
                                  [[maybe_unused]] const Pose& prev_prev_pose,
                                  const CameraIntrinsics& k, const TrackingConfig& cfg) {
  cfg.validate();
  if (map.empty()) throw ConfigError("track_frame: map is empty");

  Pose pose = prev_pose;
  TrackingLoss cur = tracking_loss(map, pose, frame, k, cfg);
  const double initial_loss = cur.loss;

  TrackingResult best{pose, cur.loss, 0, false};
  if (cur.loss == 0.0) {  // already at an optimum, e.g. a repeated frame
    best.converged = true;
    return best;
  }

  double lr_rot = cfg.lr_rotation;
  double lr_tr = cfg.lr_translation;
  int iterations = 0;
  int diverged_rounds = 0;
  int stalled_rounds = 0;

  for (int round = 0; round < cfg.outer_rounds; ++round) {
    const double round_start_best = best.final_loss;

    for (int phase = 0; phase < 2; ++phase) {
      const bool rotation_phase = (phase == 0);
      const int iters = rotation_phase ? cfg.iters_rotation : cfg.iters_translation;
      double& lr = rotation_phase ? lr_rot : lr_tr;
      const double lr_cap =
          cfg.lr_growth_cap * (rotation_phase ? cfg.lr_rotation : cfg.lr_translation);

      for (int i = 0; i < iters; ++i) {
        Pose candidate = pose;
        if (rotation_phase)
          candidate = pose.perturbed_rotation(-lr * cur.d_rotation);
        else
          candidate.translation = pose.translation - lr * cur.d_translation;

        const std::optional<double> cand_loss =
            detail::tracking_loss_only(map, candidate, frame, k, cfg);
        ++iterations;

        if (cand_loss && *cand_loss <= cur.loss) {
          pose = candidate;
          cur = tracking_loss(map, pose, frame, k, cfg);
          if (cur.loss < best.final_loss) {
            best.pose = pose;
            best.final_loss = cur.loss;
          }
          if (cur.loss == 0.0) {
            best.iterations_used = iterations;
            best.converged = true;
            return best;
          }
          lr = std::min(lr * cfg.lr_growth, lr_cap);
        } else {
          lr *= 0.5;
        }
      }
    }

    // A single stalled round may just mean the step sizes were too large;
    // they have been halved, so give the next round a chance.
    const double rel_decrease =
        (round_start_best - best.final_loss) / std::max(round_start_best, 1e-300);
    if (rel_decrease < 1e-5) {
      if (++stalled_rounds >= 2) {
        best.converged = true;
        break;
      }
    } else {
      stalled_rounds = 0;
    }

    if (cur.loss > 10.0 * initial_loss) {
      if (++diverged_rounds >= 2) {
        best.iterations_used = iterations;
        throw TrackingLostError("track_frame: loss diverged", best);
      }
    } else {
      diverged_rounds = 0;
    }
  }

  best.iterations_used = iterations;
  return best;
}

}  // namespace gslam
