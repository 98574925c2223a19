// Command-line front end: run SLAM, render novel views from a checkpoint,
// evaluate trajectories, and emit synthetic datasets.

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "gslam/pipeline.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitDatasetError = 2;
constexpr int kExitTrackingLost = 3;
constexpr int kExitConfigError = 4;

gslam::CameraIntrinsics intrinsics_from_json(const json& j) {
  gslam::CameraIntrinsics k;
  k.fx = j.at("fx").get<double>();
  k.fy = j.at("fy").get<double>();
  k.cx = j.at("cx").get<double>();
  k.cy = j.at("cy").get<double>();
  k.width = j.at("width").get<int>();
  k.height = j.at("height").get<int>();
  if (j.contains("depth_scale")) k.depth_scale = j.at("depth_scale").get<double>();
  return k;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void apply_config_file(const fs::path& path, gslam::PipelineConfig& cfg) {
  std::ifstream is(path);
  if (!is) throw gslam::ConfigError("cannot open config file: " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw gslam::ConfigError("config parse error: " + std::string(e.what()));
  }
  if (j.contains("tracking")) {
    const json& t = j["tracking"];
    maybe(t, "iters_rotation", cfg.tracking.iters_rotation);
    maybe(t, "iters_translation", cfg.tracking.iters_translation);
    maybe(t, "outer_rounds", cfg.tracking.outer_rounds);
    maybe(t, "lr_rotation", cfg.tracking.lr_rotation);
    maybe(t, "lr_translation", cfg.tracking.lr_translation);
    maybe(t, "lambda_color", cfg.tracking.weights.lambda_color);
    maybe(t, "lambda_depth", cfg.tracking.weights.lambda_depth);
    maybe(t, "tau_vis", cfg.tracking.weights.tau_vis);
    cfg.mapping.weights = cfg.tracking.weights;
  }
  if (j.contains("mapping")) {
    const json& m = j["mapping"];
    maybe(m, "parallax_threshold", cfg.mapping.parallax_threshold);
    maybe(m, "grid_stride", cfg.mapping.grid_stride);
    maybe(m, "map_iters", cfg.mapping.map_iters);
    maybe(m, "lr_center", cfg.mapping.lr_center);
    maybe(m, "lr_radius", cfg.mapping.lr_radius);
    maybe(m, "lr_opacity", cfg.mapping.lr_opacity);
    maybe(m, "lr_color", cfg.mapping.lr_color);
    maybe(m, "window_size", cfg.mapping.window_size);
    maybe(m, "backtracking", cfg.mapping.backtracking);
  }
  if (j.contains("densify")) {
    maybe(j["densify"], "tau_add", cfg.densify_thresholds.tau_add);
    maybe(j["densify"], "delta_add", cfg.densify_thresholds.delta_add);
  }
  if (j.contains("prune")) {
    maybe(j["prune"], "opacity_min", cfg.prune_thresholds.opacity_min);
    maybe(j["prune"], "radius_min", cfg.prune_thresholds.radius_min);
    maybe(j["prune"], "radius_max", cfg.prune_thresholds.radius_max);
  }
  if (j.contains("pipeline")) {
    const json& p = j["pipeline"];
    maybe(p, "checkpoint_every_keyframes", cfg.checkpoint_every_keyframes);
    maybe(p, "max_assoc_gap", cfg.max_assoc_gap);
    maybe(p, "save_keyframe_renders", cfg.save_keyframe_renders);
  }
}

gslam::CameraIntrinsics resolve_dataset_intrinsics(const fs::path& root,
                                                   const std::string& preset) {
  if (!preset.empty()) return gslam::tum_intrinsics_preset(preset);
  if (fs::exists(root / "intrinsics.json")) {
    std::ifstream is(root / "intrinsics.json");
    json j;
    is >> j;
    return intrinsics_from_json(j);
  }
  if (auto k = gslam::tum_intrinsics_from_path(root)) return *k;
  throw gslam::ConfigError(
      "cannot determine intrinsics: pass --preset or place intrinsics.json in the dataset root");
}

void print_report(const gslam::EvalReport& r, bool have_gt) {
  if (have_gt) std::cout << "ATE RMSE:        " << r.ate_rmse * 100.0 << " cm\n";
  std::cout << "mean PSNR:       " << r.psnr_mean << " dB\n";
  std::cout << "mean depth RMSE: " << r.depth_rmse_mean * 100.0 << " cm\n";
  std::cout << "mean SSIM:       " << r.ssim_mean << "\n";
}

int cmd_run(const fs::path& dataset, const std::string& synthetic_profile, int frames,
            int gaussians, double span_degrees, std::uint64_t seed, const std::string& preset,
            const fs::path& config, const fs::path& out, std::size_t max_frames, int threads,
            int downscale) {
  gslam::PipelineConfig cfg;
  cfg.out_dir = out;
  cfg.threads = threads;
  if (!config.empty()) apply_config_file(config, cfg);
  cfg.max_frames = max_frames;
  cfg.downscale = downscale;

  if (!dataset.empty()) {
    if (!fs::exists(dataset / "rgb.txt"))
      throw gslam::DatasetFormatError("not a TUM-RGBD directory: " + dataset.string());
    cfg.dataset_root = dataset;
    cfg.intrinsics = gslam::decimate_intrinsics(resolve_dataset_intrinsics(dataset, preset),
                                                downscale);
  } else {
    gslam::SyntheticSpec spec;
    spec.seed = seed;
    spec.profile = gslam::motion_profile_from_string(synthetic_profile);
    spec.n_frames = frames;
    spec.n_primitives = gaussians;
    spec.span_degrees = span_degrees;
    cfg.synthetic = spec;
    cfg.intrinsics = spec.intrinsics;
  }

  const gslam::RunResult result = gslam::run_slam(cfg);
  std::cout << "processed " << result.state.estimated.size() << " frames, "
            << result.state.keyframes.size() << " keyframes, " << result.state.map.size()
            << " gaussians\n";
  if (result.report) print_report(*result.report, result.state.ground_truth.has_value());
  std::cout << "outputs in " << out.string() << "\n";
  return kExitOk;
}

int cmd_render(const fs::path& checkpoint, const fs::path& trajectory, const fs::path& out,
               const std::string& preset, const fs::path& meta, int threads) {
  gslam::CameraIntrinsics k;
  if (!preset.empty()) {
    k = gslam::tum_intrinsics_preset(preset);
  } else {
    fs::path meta_path = meta;
    if (meta_path.empty()) meta_path = checkpoint.parent_path() / "run_meta.json";
    if (!fs::exists(meta_path))
      throw gslam::ConfigError("no intrinsics: pass --preset or --meta (run_meta.json)");
    std::ifstream is(meta_path);
    json j;
    is >> j;
    k = intrinsics_from_json(j);
  }
  gslam::Trajectory poses;
  if (!trajectory.empty()) poses = gslam::load_tum_trajectory(trajectory);
  const std::size_t n = gslam::render_views(checkpoint, poses, k, out, threads);
  std::cout << "rendered " << n << " views into " << out.string() << "\n";
  return kExitOk;
}

int cmd_eval(const fs::path& est_path, const fs::path& gt_path, const fs::path& out) {
  const gslam::Trajectory est = gslam::load_tum_trajectory(est_path);
  const gslam::Trajectory gt = gslam::load_tum_trajectory(gt_path);
  const double ate = gslam::ate_rmse(est, gt);
  std::cout << "ATE RMSE: " << ate << " m (" << ate * 100.0 << " cm) over " << est.size()
            << " estimated poses\n";
  if (!out.empty()) {
    fs::create_directories(out);
    gslam::EvalReport r;
    r.ate_rmse = ate;
    gslam::write_report_json(r, out / "ate.json");
    gslam::write_png_rgb8(out / "trajectory_topdown.png", gslam::plot_trajectory_topdown(est, gt));
    std::cout << "report in " << out.string() << "\n";
  }
  return kExitOk;
}

int cmd_synth(const fs::path& out, const std::string& profile, int frames, int gaussians,
              double span_degrees, std::uint64_t seed, int threads) {
  gslam::SyntheticSpec spec;
  spec.seed = seed;
  spec.profile = gslam::motion_profile_from_string(profile);
  spec.n_frames = frames;
  spec.n_primitives = gaussians;
  spec.span_degrees = span_degrees;
  const gslam::SyntheticScene scene = gslam::generate_synthetic(spec);
  gslam::export_tum_layout(scene, out, threads);
  std::cout << "wrote " << frames << "-frame synthetic sequence (" << gaussians
            << " gaussians) to " << out.string() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RGB-D SLAM with 3D Gaussian primitives"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "run SLAM on a dataset or a synthetic scene");
  fs::path dataset, config, out = "out";
  std::string synthetic_profile, preset;
  int frames = 60, gaussians = 500, threads = 1, downscale = 1;
  double span_degrees = 30.0;
  std::uint64_t seed = 1;
  std::size_t max_frames = static_cast<std::size_t>(-1);
  run->add_option("--dataset", dataset, "TUM-RGBD sequence directory");
  run->add_option("--synthetic", synthetic_profile, "synthetic profile: orbit|dolly|rotation");
  run->add_option("--frames", frames, "synthetic frame count");
  run->add_option("--gaussians", gaussians, "synthetic primitive count");
  run->add_option("--span-degrees", span_degrees, "synthetic motion span");
  run->add_option("--preset", preset, "intrinsics preset: fr1|fr2|fr3");
  run->add_option("--config", config, "JSON config file (flags win)");
  run->add_option("--out", out, "output directory");
  run->add_option("--max-frames", max_frames, "stop after this many frames");
  run->add_option("--seed", seed, "synthetic scene seed");
  run->add_option("--threads", threads, "render worker threads");
  run->add_option("--downscale", downscale, "integer frame decimation for dataset input");

  // render
  auto* render = app.add_subcommand("render", "render novel views from a map checkpoint");
  fs::path checkpoint, trajectory, render_out = "views", meta;
  std::string render_preset;
  int render_threads = 1;
  render->add_option("--checkpoint", checkpoint, "map checkpoint (.gsmap)")->required();
  render->add_option("--trajectory", trajectory, "TUM-format pose list to render");
  render->add_option("--out", render_out, "output directory");
  render->add_option("--preset", render_preset, "intrinsics preset: fr1|fr2|fr3");
  render->add_option("--meta", meta, "run_meta.json with intrinsics");
  render->add_option("--threads", render_threads, "render worker threads");

  // eval
  auto* eval = app.add_subcommand("eval", "trajectory metrics from TUM-format files");
  fs::path est_path, gt_path, eval_out;
  eval->add_option("--est", est_path, "estimated trajectory")->required();
  eval->add_option("--gt", gt_path, "ground-truth trajectory")->required();
  eval->add_option("--out", eval_out, "optional report directory");

  // synth
  auto* synth = app.add_subcommand("synth", "emit a synthetic TUM-layout dataset");
  fs::path synth_out;
  std::string synth_profile = "orbit";
  int synth_frames = 60, synth_gaussians = 500, synth_threads = 1;
  double synth_span = 30.0;
  std::uint64_t synth_seed = 1;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--profile", synth_profile, "orbit|dolly|rotation");
  synth->add_option("--frames", synth_frames, "frame count");
  synth->add_option("--gaussians", synth_gaussians, "primitive count");
  synth->add_option("--span-degrees", synth_span, "motion span");
  synth->add_option("--seed", synth_seed, "scene seed");
  synth->add_option("--threads", synth_threads, "render worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (run->parsed()) {
      if (dataset.empty() == synthetic_profile.empty())
        throw gslam::ConfigError("pass exactly one of --dataset / --synthetic");
      return cmd_run(dataset, synthetic_profile, frames, gaussians, span_degrees, seed, preset,
                     config, out, max_frames, threads, downscale);
    }
    if (render->parsed())
      return cmd_render(checkpoint, trajectory, render_out, render_preset, meta, render_threads);
    if (eval->parsed()) return cmd_eval(est_path, gt_path, eval_out);
    if (synth->parsed())
      return cmd_synth(synth_out, synth_profile, synth_frames, synth_gaussians, synth_span,
                       synth_seed, synth_threads);
  } catch (const gslam::TrackingLostError& e) {
    std::cerr << "tracking lost: " << e.what() << "\n";
    return kExitTrackingLost;
  } catch (const gslam::DatasetFormatError& e) {
    std::cerr << "dataset error: " << e.what() << "\n";
    return kExitDatasetError;
  } catch (const gslam::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
