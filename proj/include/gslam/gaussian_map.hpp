#pragma once

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gslam/frame.hpp"
#include "gslam/geometry.hpp"

namespace gslam {

/// Isotropic translucent blob: the eight-parameter scene atom.
struct GaussianPrimitive {
  Vec3 center;         // world frame [m]
  double radius = 0.0; // > 0 [m]
  double opacity = 0.0;
  Vec3 color;          // RGB in [0,1]

  /// Re-establish parameter ranges after a raw gradient step.
  void clamp_to_valid() {
    opacity = std::clamp(opacity, 0.0, 1.0);
    color.x = std::clamp(color.x, 0.0, 1.0);
    color.y = std::clamp(color.y, 0.0, 1.0);
    color.z = std::clamp(color.z, 0.0, 1.0);
    radius = std::max(radius, 1e-8);
  }
};

/// Growable primitive store. Pruning is stable: survivors keep their
/// relative order, so renders stay deterministic.
struct GaussianMap {
  std::vector<GaussianPrimitive> primitives;
  std::vector<std::int64_t> insertion_epoch;  // frame index each primitive was added at

  std::size_t size() const { return primitives.size(); }
  bool empty() const { return primitives.empty(); }

  void add(const GaussianPrimitive& p, std::int64_t epoch) {
    primitives.push_back(p);
    insertion_epoch.push_back(epoch);
  }
};

/// Seeds one primitive per valid-depth pixel of the first frame (identity
/// pose): center on the unprojected ray, color from the pixel, opacity 0.5,
/// radius depth/fx so the blob spans about one pixel when re-rendered.
inline GaussianMap initialize_from_frame(const Frame& frame, const CameraIntrinsics& k) {
  GaussianMap map;
  for (int y = 0; y < frame.depth.height; ++y) {
    for (int x = 0; x < frame.depth.width; ++x) {
      const double z = frame.depth.at(x, y);
      if (!(z > 0.0)) continue;
      GaussianPrimitive p;
      p.center = unproject({static_cast<double>(x), static_cast<double>(y)}, z, k);
      p.color = {frame.rgb.at(x, y, 0), frame.rgb.at(x, y, 1), frame.rgb.at(x, y, 2)};
      p.opacity = 0.5;
      p.radius = z / k.fx;
      map.add(p, 0);
    }
  }
  if (map.empty())
    throw EmptyInitializationError("initialize_from_frame: no valid depth pixels in first frame");
  return map;
}

struct PruneThresholds {
  double opacity_min = 0.005;
  double radius_min = 1e-6;
  double radius_max = 1.0;
};

/// Removes near-transparent and degenerate-radius primitives.
/// Returns the number removed.
inline std::size_t prune(GaussianMap& map, const PruneThresholds& th = {}) {
  const std::size_t before = map.size();
  std::size_t out = 0;
  for (std::size_t i = 0; i < map.size(); ++i) {
    const GaussianPrimitive& p = map.primitives[i];
    const bool keep =
        p.opacity >= th.opacity_min && p.radius >= th.radius_min && p.radius <= th.radius_max;
    if (keep) {
      map.primitives[out] = map.primitives[i];
      map.insertion_epoch[out] = map.insertion_epoch[i];
      ++out;
    }
  }
  map.primitives.resize(out);
  map.insertion_epoch.resize(out);
  return before - out;
}

// ---------------------------------------------------------------------------
// Checkpoint format: 8-byte magic "GSMAP01\0", little-endian u64 count, then
// per primitive eight little-endian f32: mu_x mu_y mu_z r o c_r c_g c_b.
// ---------------------------------------------------------------------------

namespace detail {
inline constexpr char kMapMagic[8] = {'G', 'S', 'M', 'A', 'P', '0', '1', '\0'};

inline void put_f32(std::ostream& os, double v) {
  const float f = static_cast<float>(v);
  char buf[4];
  std::memcpy(buf, &f, 4);
  os.write(buf, 4);
}

inline float get_f32(std::istream& is) {
  char buf[4];
  is.read(buf, 4);
  float f;
  std::memcpy(&f, buf, 4);
  return f;
}
}  // namespace detail

inline void save_map_checkpoint(const GaussianMap& map, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointFormatError("cannot open checkpoint for writing: " + path.string());
  os.write(detail::kMapMagic, 8);
  const std::uint64_t n = map.size();
  char cnt[8];
  std::memcpy(cnt, &n, 8);
  os.write(cnt, 8);
  for (const GaussianPrimitive& p : map.primitives) {
    detail::put_f32(os, p.center.x);
    detail::put_f32(os, p.center.y);
    detail::put_f32(os, p.center.z);
    detail::put_f32(os, p.radius);
    detail::put_f32(os, p.opacity);
    detail::put_f32(os, p.color.x);
    detail::put_f32(os, p.color.y);
    detail::put_f32(os, p.color.z);
  }
  if (!os) throw CheckpointFormatError("write failed: " + path.string());
}

inline GaussianMap load_map_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointFormatError("cannot open checkpoint: " + path.string());
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, detail::kMapMagic, 8) != 0)
    throw CheckpointFormatError("bad checkpoint magic: " + path.string());
  char cnt[8];
  is.read(cnt, 8);
  std::uint64_t n = 0;
  std::memcpy(&n, cnt, 8);
  GaussianMap map;
  map.primitives.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) {
    GaussianPrimitive p;
    p.center.x = detail::get_f32(is);
    p.center.y = detail::get_f32(is);
    p.center.z = detail::get_f32(is);
    p.radius = detail::get_f32(is);
    p.opacity = detail::get_f32(is);
    p.color.x = detail::get_f32(is);
    p.color.y = detail::get_f32(is);
    p.color.z = detail::get_f32(is);
    if (!is) throw CheckpointFormatError("truncated checkpoint: " + path.string());
    map.add(p, 0);
  }
  return map;
}

/// ASCII PLY point cloud (x y z red green blue) for external viewers.
inline void save_map_ply(const GaussianMap& map, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw CheckpointFormatError("cannot open ply for writing: " + path.string());
  os << "ply\nformat ascii 1.0\nelement vertex " << map.size()
     << "\nproperty float x\nproperty float y\nproperty float z\n"
        "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (const GaussianPrimitive& p : map.primitives) {
    const auto c8 = [](double c) {
      return static_cast<int>(std::lround(std::clamp(c, 0.0, 1.0) * 255.0));
    };
    os << static_cast<float>(p.center.x) << ' ' << static_cast<float>(p.center.y) << ' '
       << static_cast<float>(p.center.z) << ' ' << c8(p.color.x) << ' ' << c8(p.color.y) << ' '
       << c8(p.color.z) << '\n';
  }
}

}  // namespace gslam
