#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "gslam/frame.hpp"
#include "gslam/png_io.hpp"

namespace gslam {

// ---------------------------------------------------------------------------
// Published TUM-RGBD pinhole calibrations, selected by sequence name prefix.
// ---------------------------------------------------------------------------

inline CameraIntrinsics tum_intrinsics_preset(const std::string& name) {
  CameraIntrinsics k;
  k.width = 640;
  k.height = 480;
  k.depth_scale = 5000.0;
  if (name == "fr1" || name == "freiburg1") {
    k.fx = 517.3;
    k.fy = 516.5;
    k.cx = 318.6;
    k.cy = 255.3;
  } else if (name == "fr2" || name == "freiburg2") {
    k.fx = 520.9;
    k.fy = 521.0;
    k.cx = 325.1;
    k.cy = 249.7;
  } else if (name == "fr3" || name == "freiburg3") {
    k.fx = 535.4;
    k.fy = 539.2;
    k.cx = 320.1;
    k.cy = 247.6;
  } else {
    throw ConfigError("unknown intrinsics preset: " + name);
  }
  return k;
}

/// Guesses the preset from a directory name like rgbd_dataset_freiburg1_desk.
inline std::optional<CameraIntrinsics> tum_intrinsics_from_path(const std::filesystem::path& root) {
  const std::string name = root.filename().string();
  for (const char* tag : {"freiburg1", "freiburg2", "freiburg3"}) {
    if (name.find(tag) != std::string::npos) return tum_intrinsics_preset(tag);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Index file parsing and timestamp association
// ---------------------------------------------------------------------------

struct TimedPath {
  double timestamp = 0.0;
  std::string path;
};

inline std::vector<TimedPath> read_tum_index(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw DatasetFormatError("missing index file: " + file.string());
  std::vector<TimedPath> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    TimedPath tp;
    if (!(ls >> tp.timestamp >> tp.path))
      throw DatasetFormatError("malformed index line in " + file.string() + ": " + line);
    out.push_back(std::move(tp));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const TimedPath& a, const TimedPath& b) { return a.timestamp < b.timestamp; });
  return out;
}

/// Greedy nearest-neighbor timestamp association: candidate pairs within
/// `max_gap` are taken best-gap-first, each side used at most once. This is
/// the standard TUM association behavior and is stable under re-runs.
inline std::vector<std::pair<std::size_t, std::size_t>> associate_timestamps(
    const std::vector<double>& a, const std::vector<double>& b, double max_gap) {
  struct Cand {
    double gap;
    std::size_t i, j;
  };
  std::vector<Cand> cands;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    while (lo < b.size() && b[lo] < a[i] - max_gap) ++lo;
    for (std::size_t j = lo; j < b.size() && b[j] <= a[i] + max_gap; ++j)
      cands.push_back({std::abs(a[i] - b[j]), i, j});
  }
  std::sort(cands.begin(), cands.end(), [](const Cand& x, const Cand& y) {
    if (x.gap != y.gap) return x.gap < y.gap;
    if (x.i != y.i) return x.i < y.i;
    return x.j < y.j;
  });
  std::vector<bool> used_a(a.size(), false), used_b(b.size(), false);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (const Cand& c : cands) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = true;
    used_b[c.j] = true;
    pairs.emplace_back(c.i, c.j);
  }
  std::sort(pairs.begin(), pairs.end());
  return pairs;
}

// ---------------------------------------------------------------------------
// Ground-truth trajectory: parsing and time interpolation
// ---------------------------------------------------------------------------

inline Quat slerp(Quat a, Quat b, double t) {
  double d = a.w * b.w + a.x * b.x + a.y * b.y + a.z * b.z;
  if (d < 0.0) {  // take the short arc
    b = {-b.w, -b.x, -b.y, -b.z};
    d = -d;
  }
  if (d > 0.9995) {  // nearly parallel: nlerp
    Quat q{a.w + t * (b.w - a.w), a.x + t * (b.x - a.x), a.y + t * (b.y - a.y),
           a.z + t * (b.z - a.z)};
    return q.normalized();
  }
  const double theta = std::acos(std::clamp(d, -1.0, 1.0));
  const double s = std::sin(theta);
  const double wa = std::sin((1.0 - t) * theta) / s;
  const double wb = std::sin(t * theta) / s;
  Quat q{wa * a.w + wb * b.w, wa * a.x + wb * b.x, wa * a.y + wb * b.y, wa * a.z + wb * b.z};
  return q.normalized();
}

/// Loads a TUM trajectory file: "timestamp tx ty tz qx qy qz qw", '#' comments.
/// Poses are camera-to-world, as stored by the benchmark.
inline Trajectory load_tum_trajectory(const std::filesystem::path& file) {
  std::ifstream is(file);
  if (!is) throw DatasetFormatError("missing trajectory file: " + file.string());
  Trajectory traj;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    double t, tx, ty, tz, qx, qy, qz, qw;
    if (!(ls >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw))
      throw DatasetFormatError("malformed trajectory line in " + file.string() + ": " + line);
    Pose p;
    p.rotation = Quat{qw, qx, qy, qz}.normalized();
    p.translation = {tx, ty, tz};
    traj.append(t, p);
  }
  return traj;
}

inline void save_tum_trajectory(const Trajectory& traj, const std::filesystem::path& file) {
  std::ofstream os(file);
  if (!os) throw Error("cannot open trajectory for writing: " + file.string());
  os << "# timestamp tx ty tz qx qy qz qw\n";
  char buf[256];
  for (const Trajectory::Entry& e : traj.entries) {
    std::snprintf(buf, sizeof(buf), "%.6f %.9f %.9f %.9f %.9f %.9f %.9f %.9f\n", e.timestamp,
                  e.pose.translation.x, e.pose.translation.y, e.pose.translation.z,
                  e.pose.rotation.x, e.pose.rotation.y, e.pose.rotation.z, e.pose.rotation.w);
    os << buf;
  }
}

/// Interpolates a camera-to-world trajectory at time t: linear in
/// translation, spherical-linear in rotation. nullopt outside the span.
inline std::optional<Pose> interpolate_pose(const Trajectory& traj, double t) {
  const auto& e = traj.entries;
  if (e.empty() || t < e.front().timestamp || t > e.back().timestamp) return std::nullopt;
  auto it = std::lower_bound(e.begin(), e.end(), t, [](const Trajectory::Entry& a, double ts) {
    return a.timestamp < ts;
  });
  if (it == e.begin()) return it->pose;
  const Trajectory::Entry& hi = *it;
  const Trajectory::Entry& lo = *(it - 1);
  if (hi.timestamp == lo.timestamp) return lo.pose;
  const double a = (t - lo.timestamp) / (hi.timestamp - lo.timestamp);
  Pose p;
  p.translation = lo.pose.translation + a * (hi.pose.translation - lo.pose.translation);
  p.rotation = slerp(lo.pose.rotation, hi.pose.rotation, a);
  return p;
}

// ---------------------------------------------------------------------------
// Sequence loader with one-frame lookahead decoding
// ---------------------------------------------------------------------------

/// Streams a TUM-RGBD sequence in timestamp order. Each item carries the
/// associated RGB-D frame and, when ground truth is available and covers the
/// timestamp, the interpolated camera-to-world pose.
class TumSequenceLoader {
 public:
  struct Item {
    Frame frame;
    std::optional<Pose> ground_truth;  // camera-to-world
  };

  TumSequenceLoader(std::filesystem::path root, CameraIntrinsics k, double max_assoc_gap = 0.02)
      : root_(std::move(root)), k_(k) {
    const auto rgb = read_tum_index(root_ / "rgb.txt");
    const auto depth = read_tum_index(root_ / "depth.txt");
    std::vector<double> rgb_ts(rgb.size()), depth_ts(depth.size());
    for (std::size_t i = 0; i < rgb.size(); ++i) rgb_ts[i] = rgb[i].timestamp;
    for (std::size_t j = 0; j < depth.size(); ++j) depth_ts[j] = depth[j].timestamp;
    const auto pairs = associate_timestamps(rgb_ts, depth_ts, max_assoc_gap);
    for (const auto& [i, j] : pairs)
      assoc_.push_back({rgb[i].timestamp, rgb[i].path, depth[j].path});
    unmatched_rgb_ = rgb.size() - pairs.size();

    if (std::filesystem::exists(root_ / "groundtruth.txt"))
      ground_truth_ = load_tum_trajectory(root_ / "groundtruth.txt");
  }

  std::size_t size() const { return assoc_.size(); }
  std::size_t unmatched_rgb() const { return unmatched_rgb_; }
  const CameraIntrinsics& intrinsics() const { return k_; }
  const std::optional<Trajectory>& ground_truth() const { return ground_truth_; }

  /// Decodes entry i. Thread-safe for distinct i.
  Item load(std::size_t i) const {
    const Assoc& a = assoc_.at(i);
    Item item;
    item.frame.timestamp = a.timestamp;
    item.frame.rgb = read_png_rgb8(root_ / a.rgb_path);
    const Image<std::uint16_t> raw = read_png_gray16(root_ / a.depth_path);
    if (raw.width != item.frame.rgb.width || raw.height != item.frame.rgb.height)
      throw DatasetFormatError("rgb/depth size mismatch at t=" + std::to_string(a.timestamp));
    item.frame.depth = ImageD(raw.width, raw.height, 1);
    for (std::size_t p = 0; p < raw.data.size(); ++p)
      item.frame.depth.data[p] = raw.data[p] / k_.depth_scale;
    if (ground_truth_) item.ground_truth = interpolate_pose(*ground_truth_, a.timestamp);
    return item;
  }

  /// Sequential access; the next frame is decoded in the background while the
  /// caller processes the current one.
  std::optional<Item> next() {
    if (cursor_ >= assoc_.size()) return std::nullopt;
    Item item = pending_.valid() ? pending_.get() : load(cursor_);
    ++cursor_;
    if (cursor_ < assoc_.size())
      pending_ = std::async(std::launch::async, [this, i = cursor_] { return load(i); });
    return item;
  }

  void reset() {
    if (pending_.valid()) pending_.get();
    cursor_ = 0;
  }

 private:
  struct Assoc {
    double timestamp;
    std::string rgb_path;
    std::string depth_path;
  };

  std::filesystem::path root_;
  CameraIntrinsics k_;
  std::vector<Assoc> assoc_;
  std::size_t unmatched_rgb_ = 0;
  std::optional<Trajectory> ground_truth_;
  std::size_t cursor_ = 0;
  std::future<Item> pending_;
};

}  // namespace gslam
