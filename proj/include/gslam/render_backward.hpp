#pragma once

#include <cstdint>
#include <vector>

#include "gslam/render.hpp"

namespace gslam {

/// Gradients of a scalar image loss with respect to every map primitive and
/// the camera pose. Primitive entries stay zero unless the primitive
/// contributed to at least one rendered pixel.
struct GradientSet {
  std::vector<Vec3> d_center;
  std::vector<double> d_radius;
  std::vector<double> d_opacity;
  std::vector<Vec3> d_color;
  Vec3 d_rotation;     // axis-angle, left perturbation of the rotation
  Vec3 d_translation;

  explicit GradientSet(std::size_t n = 0)
      : d_center(n), d_radius(n, 0.0), d_opacity(n, 0.0), d_color(n) {}

  std::size_t size() const { return d_center.size(); }
};

namespace detail {

// Accumulated screen-space gradients of one projected primitive.
struct Grad2D {
  double gu = 0.0, gv = 0.0;  // d/d center2d
  double gr2d = 0.0;          // d/d radius2d
  double gdepth = 0.0;        // d/d camera-frame z as a compositing input
  double gopacity = 0.0;
  Vec3 gcolor;

  Grad2D& operator+=(const Grad2D& o) {
    gu += o.gu;
    gv += o.gv;
    gr2d += o.gr2d;
    gdepth += o.gdepth;
    gopacity += o.gopacity;
    gcolor += o.gcolor;
    return *this;
  }
};

}  // namespace detail

/// Backpropagates per-pixel gradients of the raw render outputs (rgb, depth,
/// silhouette) through the compositing chain and the projection.
///
/// Per pixel with contributors i (front to back, weights f_i, transmittance
/// T_i = prod_{j<i}(1-f_j)):
///   dC/dc_i = f_i T_i
///   dC/df_i = T_i (c_i - B_i),  B_i = sum_{k>i} c_k f_k prod_{i<j<k}(1-f_j)
/// and likewise for depth and silhouette; B_i is evaluated back-to-front with
/// the recurrence B_i = c_{i+1} f_{i+1} + (1-f_{i+1}) B_{i+1}, which avoids
/// dividing by (1-f_i) and so stays exact even for fully opaque contributors.
///
/// Tiles accumulate into private buffers merged in tile order, making the
/// result independent of the thread count.
inline GradientSet render_backward(const RenderOutput& out, const ImageD& grad_rgb,
                                   const ImageD& grad_depth, const ImageD& grad_silhouette,
                                   std::size_t map_size, int threads = 1) {
  if (!out.has_cache)
    throw InternalError("render_backward: RenderOutput carries no contributor cache");
  if (grad_rgb.width != out.width || grad_rgb.height != out.height || grad_rgb.channels != 3 ||
      !grad_depth.same_shape(out.depth) || !grad_silhouette.same_shape(out.silhouette))
    throw DimensionError("render_backward: gradient image shape mismatch");

  const std::size_t n_tiles = out.bins.size();
  std::vector<std::vector<detail::Grad2D>> tile_grads(n_tiles);

  parallel_for(n_tiles, threads, [&](std::size_t t) {
    const auto& bin = out.bins[t];
    if (bin.empty()) return;
    auto& local = tile_grads[t];
    local.assign(bin.size(), {});

    const int tx = static_cast<int>(t) % out.tiles_x;
    const int ty = static_cast<int>(t) / out.tiles_x;
    const int x0 = tx * out.tile_size;
    const int y0 = ty * out.tile_size;
    const int x1 = std::min(out.width, x0 + out.tile_size);
    const int y1 = std::min(out.height, y0 + out.tile_size);

    std::vector<double> trans;  // reused per pixel
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) {
        const std::uint32_t cnt = out.contrib_count.at(x, y);
        if (cnt == 0) continue;
        const Vec3 gC{grad_rgb.at(x, y, 0), grad_rgb.at(x, y, 1), grad_rgb.at(x, y, 2)};
        const double gD = grad_depth.at(x, y);
        const double gS = grad_silhouette.at(x, y);
        if (gC.x == 0.0 && gC.y == 0.0 && gC.z == 0.0 && gD == 0.0 && gS == 0.0) continue;

        const std::uint32_t off = out.contrib_offset.at(x, y);
        const auto* entries = &out.tile_entries[t][off];

        trans.resize(cnt);
        double T = 1.0;
        for (std::uint32_t i = 0; i < cnt; ++i) {
          trans[i] = T;
          T *= (1.0 - entries[i].f);
        }

        Vec3 Bc{0, 0, 0};
        double Bd = 0.0, Bs = 0.0;
        for (std::uint32_t ii = cnt; ii-- > 0;) {
          const double f = entries[ii].f;
          const double Ti = trans[ii];
          const std::uint32_t pos = entries[ii].bin_pos;
          const ProjectedGaussian& g = out.projected[bin[pos]];

          const double df = dot(gC, Ti * (g.color - Bc)) + gD * Ti * (g.depth - Bd) +
                            gS * Ti * (1.0 - Bs);

          detail::Grad2D& acc = local[pos];
          acc.gcolor += (f * Ti) * gC;
          acc.gdepth += gD * f * Ti;

          const double dx = static_cast<double>(x) - g.center2d.x;
          const double dy = static_cast<double>(y) - g.center2d.y;
          const double d2 = dx * dx + dy * dy;
          const double r2 = g.radius2d * g.radius2d;
          acc.gu += df * f * dx / r2;
          acc.gv += df * f * dy / r2;
          acc.gr2d += df * f * d2 / (r2 * g.radius2d);
          acc.gopacity += df * std::exp(-d2 / (2.0 * r2));

          Bc = f * g.color + (1.0 - f) * Bc;
          Bd = f * g.depth + (1.0 - f) * Bd;
          Bs = f + (1.0 - f) * Bs;
        }
      }
    }
  });

  // Merge tile buffers in tile order, then chain through the projection.
  std::vector<detail::Grad2D> per_projected(out.projected.size());
  for (std::size_t t = 0; t < n_tiles; ++t) {
    const auto& bin = out.bins[t];
    const auto& local = tile_grads[t];
    for (std::size_t pos = 0; pos < local.size(); ++pos) per_projected[bin[pos]] += local[pos];
  }

  GradientSet grads(map_size);
  const Quat rot_inv = out.pose.rotation.conjugate();
  const CameraIntrinsics& k = out.intrinsics;
  for (std::size_t i = 0; i < out.projected.size(); ++i) {
    const detail::Grad2D& a = per_projected[i];
    const ProjectedGaussian& g = out.projected[i];
    const double z = g.cam.z;

    const double gx = a.gu * k.fx / z;
    const double gy = a.gv * k.fy / z;
    const double gz = -a.gu * k.fx * g.cam.x / (z * z) - a.gv * k.fy * g.cam.y / (z * z) -
                      a.gr2d * g.radius2d / z + a.gdepth;
    const Vec3 g_cam{gx, gy, gz};

    grads.d_center[g.source_index] += rot_inv.rotate(g_cam);
    grads.d_radius[g.source_index] += a.gr2d * k.fx / z;
    grads.d_opacity[g.source_index] += a.gopacity;
    grads.d_color[g.source_index] += a.gcolor;

    grads.d_translation += g_cam;
    grads.d_rotation += cross(g.cam - out.pose.translation, g_cam);
  }
  return grads;
}

}  // namespace gslam
