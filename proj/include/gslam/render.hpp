#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "gslam/gaussian_map.hpp"
#include "gslam/geometry.hpp"
#include "gslam/image.hpp"

namespace gslam {

inline constexpr double kZNear = 0.01;            // cull plane [m]
inline constexpr double kCutoffSigmas = 3.0;      // hard support radius, in radius2d units
inline constexpr int kTileSize = 16;              // pixels
inline constexpr double kTransmittanceMin = 1e-4; // early-out threshold
inline constexpr double kSilhouetteEps = 1e-6;    // denominator guard for normalized depth

/// A primitive after projection into one view.
struct ProjectedGaussian {
  Vec2 center2d;          // pixels
  double depth = 0.0;     // camera-frame z [m]
  double radius2d = 0.0;  // pixels
  double opacity = 0.0;
  Vec3 color;
  std::int32_t source_index = -1;  // index into the source GaussianMap
  Vec3 cam;                        // camera-frame center, cached for the backward pass
};

/// Screen-space weight of one projected primitive at pixel p.
/// Exactly zero beyond the hard cutoff so per-pixel work stays bounded and
/// parameter gradients are sparse.
inline double eval_weight(const ProjectedGaussian& g, Vec2 p) {
  const double dx = p.x - g.center2d.x;
  const double dy = p.y - g.center2d.y;
  const double d2 = dx * dx + dy * dy;
  const double cut = kCutoffSigmas * g.radius2d;
  if (d2 > cut * cut) return 0.0;
  return g.opacity * std::exp(-d2 / (2.0 * g.radius2d * g.radius2d));
}

/// Perspective projection of a primitive; nullopt when the center is at or
/// behind the near plane.
inline std::optional<ProjectedGaussian> project_gaussian(const GaussianPrimitive& g,
                                                         const Pose& pose,
                                                         const CameraIntrinsics& k,
                                                         std::int32_t source_index = -1) {
  const Vec3 cam = pose.transform(g.center);
  if (!(cam.z > kZNear)) return std::nullopt;
  ProjectedGaussian p;
  p.center2d = {k.fx * cam.x / cam.z + k.cx, k.fy * cam.y / cam.z + k.cy};
  p.depth = cam.z;
  p.radius2d = g.radius * k.fx / cam.z;
  p.opacity = g.opacity;
  p.color = g.color;
  p.source_index = source_index;
  p.cam = cam;
  return p;
}

struct RenderOptions {
  int threads = 1;
  bool with_cache = true;                         // keep per-pixel contributor lists
  double transmittance_min = kTransmittanceMin;   // 0 disables early termination
};

/// Forward rendering result plus the per-pixel composition state needed by
/// render_backward. The contributor cache references the depth-sorted
/// `projected` array through per-tile candidate lists.
struct RenderOutput {
  int width = 0;
  int height = 0;
  ImageD rgb;         // H x W x 3, black background
  ImageD depth;       // H x W, 0 background
  ImageD silhouette;  // H x W in [0,1], 0 background

  Pose pose;
  CameraIntrinsics intrinsics;

  std::vector<ProjectedGaussian> projected;  // sorted by (depth, source_index)

  // Tile structure. Bin entries are indices into `projected`, ascending.
  int tile_size = kTileSize;
  int tiles_x = 0;
  int tiles_y = 0;
  std::vector<std::vector<std::int32_t>> bins;

  struct Contribution {
    std::uint32_t bin_pos;  // position in this pixel's tile bin
    double f;               // cached weight
  };
  bool has_cache = false;
  std::vector<std::vector<Contribution>> tile_entries;  // per tile, pixel-major
  Image<std::uint32_t> contrib_offset;                  // into the pixel's tile_entries
  Image<std::uint32_t> contrib_count;

  int tile_index_of(int x, int y) const { return (y / tile_size) * tiles_x + (x / tile_size); }

  /// Ordered (source_index, weight) contributors at a pixel.
  std::vector<std::pair<std::int32_t, double>> contributors(int x, int y) const {
    std::vector<std::pair<std::int32_t, double>> out;
    if (!has_cache) return out;
    const int t = tile_index_of(x, y);
    const std::uint32_t off = contrib_offset.at(x, y);
    const std::uint32_t cnt = contrib_count.at(x, y);
    out.reserve(cnt);
    for (std::uint32_t i = 0; i < cnt; ++i) {
      const Contribution& c = tile_entries[t][off + i];
      out.emplace_back(projected[bins[t][c.bin_pos]].source_index, c.f);
    }
    return out;
  }

  /// D(p)/S(p) where the silhouette exceeds tau; 0 elsewhere. The raw
  /// accumulated depth underestimates the surface wherever coverage is
  /// partial, so losses consume this normalized value.
  double normalized_depth(int x, int y, double tau) const {
    const double s = silhouette.at(x, y);
    return s > tau ? depth.at(x, y) / s : 0.0;
  }

  ImageD normalized_depth_image(double tau) const {
    ImageD out(width, height, 1);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) out.at(x, y) = normalized_depth(x, y, tau);
    return out;
  }
};

namespace detail {

/// Projects, culls, and depth-sorts the whole map for one view.
inline std::vector<ProjectedGaussian> project_and_sort(const GaussianMap& map, const Pose& pose,
                                                       const CameraIntrinsics& k) {
  std::vector<ProjectedGaussian> out;
  out.reserve(map.size());
  for (std::size_t i = 0; i < map.size(); ++i) {
    if (auto p = project_gaussian(map.primitives[i], pose, k, static_cast<std::int32_t>(i)))
      out.push_back(*p);
  }
  std::stable_sort(out.begin(), out.end(), [](const ProjectedGaussian& a, const ProjectedGaussian& b) {
    if (a.depth != b.depth) return a.depth < b.depth;
    return a.source_index < b.source_index;
  });
  return out;
}

/// Front-to-back alpha compositing of one pixel over a candidate list.
/// The arithmetic here is the single source of truth for both the tiled
/// renderer and the naive reference loop, so their outputs match bit for bit.
inline void composite_pixel(int x, int y, const std::vector<ProjectedGaussian>& projected,
                            const std::vector<std::int32_t>& bin, const RenderOptions& opt,
                            RenderOutput& out, std::vector<RenderOutput::Contribution>* entries) {
  const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
  double T = 1.0;
  Vec3 c_acc{0, 0, 0};
  double d_acc = 0.0;
  double s_acc = 0.0;
  std::uint32_t n_contrib = 0;
  const std::uint32_t offset = entries ? static_cast<std::uint32_t>(entries->size()) : 0;

  for (std::uint32_t pos = 0; pos < bin.size(); ++pos) {
    const ProjectedGaussian& g = projected[bin[pos]];
    const double f = eval_weight(g, p);
    if (f <= 0.0) continue;
    c_acc += (f * T) * g.color;
    d_acc += g.depth * f * T;
    s_acc += f * T;
    if (entries) entries->push_back({pos, f});
    ++n_contrib;
    T *= (1.0 - f);
    if (opt.transmittance_min > 0.0 && T < opt.transmittance_min) break;
  }

  out.rgb.at(x, y, 0) = c_acc.x;
  out.rgb.at(x, y, 1) = c_acc.y;
  out.rgb.at(x, y, 2) = c_acc.z;
  out.depth.at(x, y) = d_acc;
  out.silhouette.at(x, y) = s_acc;
  if (entries) {
    out.contrib_offset.at(x, y) = offset;
    out.contrib_count.at(x, y) = n_contrib;
  }
}

inline RenderOutput make_output(const Pose& pose, const CameraIntrinsics& k, bool with_cache) {
  RenderOutput out;
  out.width = k.width;
  out.height = k.height;
  out.rgb = ImageD(k.width, k.height, 3);
  out.depth = ImageD(k.width, k.height, 1);
  out.silhouette = ImageD(k.width, k.height, 1);
  out.pose = pose;
  out.intrinsics = k;
  out.has_cache = with_cache;
  if (with_cache) {
    out.contrib_offset = Image<std::uint32_t>(k.width, k.height, 1);
    out.contrib_count = Image<std::uint32_t>(k.width, k.height, 1);
  }
  return out;
}

}  // namespace detail

/// Tile-binned forward rasterization. Tiles own disjoint pixel ranges and are
/// processed independently, so output is identical for any thread count.
inline RenderOutput render(const GaussianMap& map, const Pose& pose, const CameraIntrinsics& k,
                           const RenderOptions& opt = {}) {
  RenderOutput out = detail::make_output(pose, k, opt.with_cache);
  out.projected = detail::project_and_sort(map, pose, k);

  out.tile_size = kTileSize;
  out.tiles_x = (k.width + kTileSize - 1) / kTileSize;
  out.tiles_y = (k.height + kTileSize - 1) / kTileSize;
  const int n_tiles = out.tiles_x * out.tiles_y;
  out.bins.assign(n_tiles, {});

  // Bin by the bounding square of each hard-support circle, in sorted order
  // so every bin stays depth-ordered.
  for (std::int32_t i = 0; i < static_cast<std::int32_t>(out.projected.size()); ++i) {
    const ProjectedGaussian& g = out.projected[i];
    const double cut = kCutoffSigmas * g.radius2d;
    const int x0 = std::max(0, static_cast<int>(std::floor(g.center2d.x - cut)));
    const int x1 = std::min(k.width - 1, static_cast<int>(std::ceil(g.center2d.x + cut)));
    const int y0 = std::max(0, static_cast<int>(std::floor(g.center2d.y - cut)));
    const int y1 = std::min(k.height - 1, static_cast<int>(std::ceil(g.center2d.y + cut)));
    if (x0 > x1 || y0 > y1) continue;
    for (int ty = y0 / kTileSize; ty <= y1 / kTileSize; ++ty)
      for (int tx = x0 / kTileSize; tx <= x1 / kTileSize; ++tx)
        out.bins[ty * out.tiles_x + tx].push_back(i);
  }

  if (opt.with_cache) out.tile_entries.assign(n_tiles, {});

  parallel_for(static_cast<std::size_t>(n_tiles), opt.threads, [&](std::size_t t) {
    const int tx = static_cast<int>(t) % out.tiles_x;
    const int ty = static_cast<int>(t) / out.tiles_x;
    const int x0 = tx * kTileSize;
    const int y0 = ty * kTileSize;
    const int x1 = std::min(k.width, x0 + kTileSize);
    const int y1 = std::min(k.height, y0 + kTileSize);
    std::vector<RenderOutput::Contribution>* entries =
        opt.with_cache ? &out.tile_entries[t] : nullptr;
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        detail::composite_pixel(x, y, out.projected, out.bins[t], opt, out, entries);
  });

  return out;
}

/// Reference renderer: every pixel walks the full depth-sorted primitive
/// list, no tiling. Serves as the oracle the tiled path is checked against.
inline RenderOutput render_naive(const GaussianMap& map, const Pose& pose,
                                 const CameraIntrinsics& k, const RenderOptions& opt = {}) {
  RenderOutput out = detail::make_output(pose, k, opt.with_cache);
  out.projected = detail::project_and_sort(map, pose, k);

  out.tile_size = std::max(std::max(k.width, k.height), 1);
  out.tiles_x = 1;
  out.tiles_y = 1;
  out.bins.assign(1, {});
  out.bins[0].resize(out.projected.size());
  for (std::int32_t i = 0; i < static_cast<std::int32_t>(out.projected.size()); ++i)
    out.bins[0][i] = i;
  if (opt.with_cache) out.tile_entries.assign(1, {});

  std::vector<RenderOutput::Contribution>* entries = opt.with_cache ? &out.tile_entries[0] : nullptr;
  for (int y = 0; y < k.height; ++y)
    for (int x = 0; x < k.width; ++x)
      detail::composite_pixel(x, y, out.projected, out.bins[0], opt, out, entries);
  return out;
}

}  // namespace gslam
