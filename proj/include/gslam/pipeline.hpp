#pragma once

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <span>

#include "gslam/densify.hpp"
#include "gslam/mapper.hpp"
#include "gslam/metrics.hpp"
#include "gslam/synthetic.hpp"
#include "gslam/tracker.hpp"
#include "gslam/tum_dataset.hpp"

namespace gslam {

// ---------------------------------------------------------------------------
// Frame sources
// ---------------------------------------------------------------------------

struct SourceItem {
  Frame frame;
  std::optional<Pose> ground_truth;  // camera-to-world
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::optional<SourceItem> next() = 0;
  virtual void reset() = 0;
  virtual std::size_t size() const = 0;
};

class TumFrameSource final : public FrameSource {
 public:
  TumFrameSource(std::filesystem::path root, CameraIntrinsics k, double max_assoc_gap)
      : loader_(std::move(root), k, max_assoc_gap) {}

  std::optional<SourceItem> next() override {
    auto item = loader_.next();
    if (!item) return std::nullopt;
    return SourceItem{std::move(item->frame), item->ground_truth};
  }
  void reset() override { loader_.reset(); }
  std::size_t size() const override { return loader_.size(); }
  const TumSequenceLoader& loader() const { return loader_; }

 private:
  TumSequenceLoader loader_;
};

/// Decorates a source with integer downscaling of every frame.
class DecimatingFrameSource final : public FrameSource {
 public:
  DecimatingFrameSource(std::unique_ptr<FrameSource> inner, int factor)
      : inner_(std::move(inner)), factor_(factor) {}

  std::optional<SourceItem> next() override {
    auto item = inner_->next();
    if (!item || factor_ <= 1) return item;
    item->frame = decimate_frame(item->frame, factor_);
    return item;
  }
  void reset() override { inner_->reset(); }
  std::size_t size() const override { return inner_->size(); }

 private:
  std::unique_ptr<FrameSource> inner_;
  int factor_;
};

class SyntheticFrameSource final : public FrameSource {
 public:
  SyntheticFrameSource(SyntheticScene scene, int threads)
      : scene_(std::move(scene)), threads_(threads) {}

  std::optional<SourceItem> next() override {
    if (cursor_ >= scene_.ground_truth.size()) return std::nullopt;
    SourceItem item{render_synthetic_frame(scene_, cursor_, threads_),
                    scene_.ground_truth.entries[cursor_].pose};
    ++cursor_;
    return item;
  }
  void reset() override { cursor_ = 0; }
  std::size_t size() const override { return scene_.ground_truth.size(); }
  const SyntheticScene& scene() const { return scene_; }

 private:
  SyntheticScene scene_;
  int threads_ = 1;
  std::size_t cursor_ = 0;
};

// ---------------------------------------------------------------------------
// Pipeline configuration and state
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::optional<std::filesystem::path> dataset_root;  // TUM layout
  std::optional<SyntheticSpec> synthetic;

  CameraIntrinsics intrinsics;
  TrackingConfig tracking;
  MappingConfig mapping;
  DensifyThresholds densify_thresholds;
  PruneThresholds prune_thresholds;

  std::filesystem::path out_dir;
  std::size_t max_frames = static_cast<std::size_t>(-1);
  int checkpoint_every_keyframes = 50;
  int threads = 1;
  int downscale = 1;  // integer decimation of dataset frames; intrinsics must match
  double max_assoc_gap = 0.02;
  bool save_keyframe_renders = true;
  bool compute_report = true;

  void validate() const {
    if (dataset_root.has_value() == synthetic.has_value())
      throw ConfigError("pipeline: exactly one of dataset_root / synthetic must be set");
    if (out_dir.empty()) throw ConfigError("pipeline: output directory required");
    if (max_frames < 1) throw ConfigError("pipeline: frame limit must be >= 1");
    intrinsics.validate();
  }
};

struct FrameTelemetry {
  std::int64_t frame = 0;
  double track_ms = 0.0;
  double map_ms = 0.0;
  double loss = 0.0;
  std::size_t n_gaussians = 0;
};

struct RunState {
  GaussianMap map;
  std::vector<Keyframe> keyframes;
  Trajectory estimated;                  // camera-to-world, one entry per processed frame
  std::optional<Trajectory> ground_truth;  // entries only for frames that had GT
  std::vector<FrameTelemetry> telemetry;
  bool tracking_lost = false;
};

struct RunResult {
  RunState state;
  std::optional<EvalReport> report;
};

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

namespace detail {

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline void write_render_triple(const RenderOutput& out, const std::filesystem::path& dir,
                                const std::string& stem, double depth_scale, double tau_vis) {
  write_png_rgb8(dir / (stem + "_rgb.png"), out.rgb);
  write_png_gray16(dir / (stem + "_depth.png"), out.normalized_depth_image(tau_vis), depth_scale);
  write_png_gray8(dir / (stem + "_silhouette.png"), out.silhouette);
}

inline void write_telemetry(const std::vector<FrameTelemetry>& telemetry,
                            const std::filesystem::path& path) {
  std::ofstream os(path);
  char buf[256];
  for (const FrameTelemetry& t : telemetry) {
    std::snprintf(buf, sizeof(buf),
                  "{\"frame\": %lld, \"track_ms\": %.3f, \"map_ms\": %.3f, \"loss\": %.9f, "
                  "\"n_gaussians\": %zu}\n",
                  static_cast<long long>(t.frame), t.track_ms, t.map_ms, t.loss, t.n_gaussians);
    os << buf;
  }
}

inline void write_run_meta(const PipelineConfig& cfg, const std::filesystem::path& path) {
  std::ofstream os(path);
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "{\n  \"fx\": %.9f,\n  \"fy\": %.9f,\n  \"cx\": %.9f,\n  \"cy\": %.9f,\n"
                "  \"width\": %d,\n  \"height\": %d,\n  \"depth_scale\": %.6f,\n"
                "  \"tau_vis\": %.6f\n}\n",
                cfg.intrinsics.fx, cfg.intrinsics.fy, cfg.intrinsics.cx, cfg.intrinsics.cy,
                cfg.intrinsics.width, cfg.intrinsics.height, cfg.intrinsics.depth_scale,
                cfg.tracking.weights.tau_vis);
  os << buf;
}

inline std::unique_ptr<FrameSource> make_source(const PipelineConfig& cfg) {
  if (cfg.dataset_root) {
    // The loader needs intrinsics only for depth decoding; frames come out
    // at native resolution and are decimated here to match cfg.intrinsics.
    auto tum =
        std::make_unique<TumFrameSource>(*cfg.dataset_root, cfg.intrinsics, cfg.max_assoc_gap);
    if (cfg.downscale > 1)
      return std::make_unique<DecimatingFrameSource>(std::move(tum), cfg.downscale);
    return tum;
  }
  return std::make_unique<SyntheticFrameSource>(generate_synthetic(*cfg.synthetic), cfg.threads);
}

inline void flush_outputs(const PipelineConfig& cfg, const RunState& state) {
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  save_tum_trajectory(state.estimated, cfg.out_dir / "trajectory.txt");
  if (state.ground_truth) save_tum_trajectory(*state.ground_truth, cfg.out_dir / "groundtruth.txt");
  save_map_checkpoint(state.map, cfg.out_dir / "map.gsmap");
  save_map_ply(state.map, cfg.out_dir / "map.ply");
  write_telemetry(state.telemetry, cfg.out_dir / "telemetry.jsonl");
  write_run_meta(cfg, cfg.out_dir / "run_meta.json");
}

/// Second pass over the sequence: per-frame image metrics at the estimated
/// poses, plus trajectory ATE when ground truth exists.
inline EvalReport evaluate_run(const PipelineConfig& cfg, const RunState& state,
                               FrameSource& source) {
  EvalReport report;
  source.reset();
  RenderOptions opt;
  opt.threads = cfg.threads;
  opt.with_cache = false;
  const double tau = cfg.tracking.weights.tau_vis;

  double psnr_sum = 0.0, depth_sum = 0.0, ssim_sum = 0.0;
  std::size_t n = 0, depth_n = 0;
  for (std::size_t i = 0; i < state.estimated.size(); ++i) {
    const auto item = source.next();
    if (!item) break;
    const Pose cam_pose = state.estimated.entries[i].pose.inverse();
    const RenderOutput out = render(state.map, cam_pose, cfg.intrinsics, opt);

    EvalReport::PerFrame pf;
    pf.timestamp = item->frame.timestamp;
    pf.psnr = psnr(out.rgb, item->frame.rgb);
    pf.ssim = ssim(out.rgb, item->frame.rgb);
    try {
      pf.depth_rmse = depth_rmse(out.normalized_depth_image(tau), item->frame.depth,
                                 &out.silhouette, tau);
      depth_sum += pf.depth_rmse;
      ++depth_n;
    } catch (const UndefinedMetricError&) {
      pf.depth_rmse = -1.0;  // no overlap on this frame
    }
    psnr_sum += pf.psnr;
    ssim_sum += pf.ssim;
    ++n;
    report.frames.push_back(pf);
  }
  if (n > 0) {
    report.psnr_mean = psnr_sum / n;
    report.ssim_mean = ssim_sum / n;
  }
  if (depth_n > 0) report.depth_rmse_mean = depth_sum / depth_n;
  if (state.ground_truth && state.ground_truth->size() >= 3)
    report.ate_rmse = ate_rmse(state.estimated, *state.ground_truth, cfg.max_assoc_gap);
  return report;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// SLAM loop
// ---------------------------------------------------------------------------

inline RunResult run_slam(const PipelineConfig& cfg, FrameSource& source);

/// Runs the full loop: first frame initializes the map at the identity pose;
/// every later frame is tracked against the current map; frames promoted by
/// the parallax rule trigger densify -> optimize_scene -> prune over the
/// keyframe window. Outputs (trajectory, checkpoint, report, telemetry) are
/// written to cfg.out_dir. On tracking loss the partial outputs are flushed
/// and the error rethrown.
inline RunResult run_slam(const PipelineConfig& cfg) {
  cfg.validate();
  std::unique_ptr<FrameSource> source = detail::make_source(cfg);
  return run_slam(cfg, *source);
}

inline RunResult run_slam(const PipelineConfig& cfg, FrameSource& source) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);
  if (cfg.save_keyframe_renders) fs::create_directories(cfg.out_dir / "keyframes");

  TrackingConfig tracking = cfg.tracking;
  MappingConfig mapping = cfg.mapping;
  tracking.threads = cfg.threads;
  mapping.threads = cfg.threads;

  RunState state;
  std::int64_t frame_index = 0;
  Pose pose = Pose::identity();       // world-to-camera of the current frame
  Pose prev_pose = Pose::identity();
  std::size_t kfs_since_checkpoint = 0;

  RenderOptions ropt;
  ropt.threads = cfg.threads;
  ropt.with_cache = false;

  {
    while (static_cast<std::size_t>(frame_index) < cfg.max_frames) {
      const auto item = source.next();
      if (!item) break;
      const Frame& frame = item->frame;

      FrameTelemetry tel;
      tel.frame = frame_index;

      // --- Track (or initialize on the first frame) ----------------------
      const auto t0 = std::chrono::steady_clock::now();
      if (frame_index == 0) {
        pose = Pose::identity();
        state.map = initialize_from_frame(frame, cfg.intrinsics);
      } else {
        TrackingResult tr;
        try {
          tr = track_frame(state.map, frame, pose, prev_pose, cfg.intrinsics, tracking);
        } catch (const TrackingLostError& e) {
          state.tracking_lost = true;
          state.estimated.append(frame.timestamp, e.best().pose.inverse());
          detail::flush_outputs(cfg, state);
          throw;
        }
        prev_pose = pose;
        pose = tr.pose;
        tel.loss = tr.final_loss;
      }
      tel.track_ms = detail::ms_since(t0);

      state.estimated.append(frame.timestamp, pose.inverse());
      if (item->ground_truth) {
        if (!state.ground_truth) state.ground_truth.emplace();
        state.ground_truth->append(frame.timestamp, *item->ground_truth);
      }

      // --- Map on keyframes ----------------------------------------------
      const Keyframe* latest = state.keyframes.empty() ? nullptr : &state.keyframes.back();
      if (select_keyframe(latest, frame, pose, cfg.intrinsics, mapping)) {
        const auto t1 = std::chrono::steady_clock::now();
        const RenderOutput view = render(state.map, pose, cfg.intrinsics, ropt);
        densify(state.map, frame, pose, view, cfg.intrinsics, cfg.densify_thresholds, frame_index);

        state.keyframes.push_back({frame, pose, frame_index});
        const std::size_t w = std::min<std::size_t>(state.keyframes.size(), mapping.window_size);
        const std::span<const Keyframe> window{state.keyframes.data() + state.keyframes.size() - w,
                                               w};
        tel.loss = optimize_scene(state.map, window, cfg.intrinsics, mapping);
        prune(state.map, cfg.prune_thresholds);
        tel.map_ms = detail::ms_since(t1);

        if (cfg.save_keyframe_renders) {
          char stem[32];
          std::snprintf(stem, sizeof(stem), "kf_%06lld", static_cast<long long>(frame_index));
          const RenderOutput after = render(state.map, pose, cfg.intrinsics, ropt);
          detail::write_render_triple(after, cfg.out_dir / "keyframes", stem,
                                      cfg.intrinsics.depth_scale, tracking.weights.tau_vis);
        }
        if (++kfs_since_checkpoint >= static_cast<std::size_t>(cfg.checkpoint_every_keyframes)) {
          fs::create_directories(cfg.out_dir / "checkpoints");
          char name[48];
          std::snprintf(name, sizeof(name), "map_kf%06zu.gsmap", state.keyframes.size());
          save_map_checkpoint(state.map, cfg.out_dir / "checkpoints" / name);
          kfs_since_checkpoint = 0;
        }
      }

      tel.n_gaussians = state.map.size();
      state.telemetry.push_back(tel);
      if (frame_index == 0) prev_pose = pose;
      ++frame_index;
    }
  }

  detail::flush_outputs(cfg, state);

  RunResult result;
  result.state = std::move(state);
  if (cfg.compute_report) {
    result.report = detail::evaluate_run(cfg, result.state, source);
    write_report_csv(*result.report, cfg.out_dir / "report.csv");
    write_report_json(*result.report, cfg.out_dir / "report.json");
    fs::create_directories(cfg.out_dir / "plots");
    if (result.state.ground_truth)
      write_png_rgb8(cfg.out_dir / "plots" / "trajectory_topdown.png",
                     plot_trajectory_topdown(result.state.estimated, *result.state.ground_truth));
    std::vector<double> psnr_series;
    for (const auto& f : result.report->frames) psnr_series.push_back(f.psnr);
    write_png_rgb8(cfg.out_dir / "plots" / "psnr_per_frame.png", plot_series(psnr_series));
  }
  return result;
}

/// Renders RGB/depth/silhouette triples from a saved checkpoint at each pose
/// of the given camera-to-world trajectory. Returns the number of poses
/// rendered; an empty list is a successful no-op.
inline std::size_t render_views(const std::filesystem::path& checkpoint, const Trajectory& poses,
                                const CameraIntrinsics& k, const std::filesystem::path& out_dir,
                                int threads = 1, double tau_vis = 0.99) {
  const GaussianMap map = load_map_checkpoint(checkpoint);
  std::filesystem::create_directories(out_dir);
  RenderOptions opt;
  opt.threads = threads;
  opt.with_cache = false;
  char stem[48];
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const RenderOutput out = render(map, poses.entries[i].pose.inverse(), k, opt);
    std::snprintf(stem, sizeof(stem), "view_%06zu", i);
    detail::write_render_triple(out, out_dir, stem, k.depth_scale, tau_vis);
  }
  return poses.size();
}

}  // namespace gslam
