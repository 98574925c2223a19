#pragma once

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "gslam/frame.hpp"
#include "gslam/image.hpp"
#include "gslam/tum_dataset.hpp"

namespace gslam {

// ---------------------------------------------------------------------------
// Rigid alignment (Horn's closed-form quaternion method)
// ---------------------------------------------------------------------------

namespace detail {

/// Eigen-decomposition of a symmetric 4x4 by cyclic Jacobi rotations.
/// Returns eigenvalues and column eigenvectors.
inline void jacobi_eigen4(std::array<std::array<double, 4>, 4> a,
                          std::array<double, 4>& eigenvalues,
                          std::array<std::array<double, 4>, 4>& eigenvectors) {
  auto& v = eigenvectors;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) v[i][j] = (i == j) ? 1.0 : 0.0;

  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;

    for (int p = 0; p < 4; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int i = 0; i < 4; ++i) {
          const double aip = a[i][p], aiq = a[i][q];
          a[i][p] = c * aip - s * aiq;
          a[i][q] = s * aip + c * aiq;
        }
        for (int i = 0; i < 4; ++i) {
          const double api = a[p][i], aqi = a[q][i];
          a[p][i] = c * api - s * aqi;
          a[q][i] = s * api + c * aqi;
        }
        for (int i = 0; i < 4; ++i) {
          const double vip = v[i][p], viq = v[i][q];
          v[i][p] = c * vip - s * viq;
          v[i][q] = s * vip + c * viq;
        }
      }
    }
  }
  for (int i = 0; i < 4; ++i) eigenvalues[i] = a[i][i];
}

}  // namespace detail

struct RigidTransform {
  Mat3 rotation;
  Vec3 translation;

  Vec3 apply(Vec3 p) const { return rotation * p + translation; }
};

/// Least-squares rotation + translation (no scale) taking `src` onto `dst`.
/// Under-determined configurations (fewer than 3 non-collinear points) still
/// return one of the optimal transforms.
inline RigidTransform align_rigid(const std::vector<Vec3>& src, const std::vector<Vec3>& dst) {
  if (src.size() != dst.size() || src.empty())
    throw InsufficientOverlapError("align_rigid: point sets must be non-empty and equal-sized");
  const double inv_n = 1.0 / static_cast<double>(src.size());
  Vec3 cs{0, 0, 0}, cd{0, 0, 0};
  for (std::size_t i = 0; i < src.size(); ++i) {
    cs += src[i];
    cd += dst[i];
  }
  cs = inv_n * cs;
  cd = inv_n * cd;

  // Cross-covariance of the centered sets.
  double S[3][3] = {};
  for (std::size_t i = 0; i < src.size(); ++i) {
    const Vec3 a = src[i] - cs;
    const Vec3 b = dst[i] - cd;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) S[r][c] += a[r] * b[c];
  }

  std::array<std::array<double, 4>, 4> n{};
  n[0][0] = S[0][0] + S[1][1] + S[2][2];
  n[0][1] = n[1][0] = S[1][2] - S[2][1];
  n[0][2] = n[2][0] = S[2][0] - S[0][2];
  n[0][3] = n[3][0] = S[0][1] - S[1][0];
  n[1][1] = S[0][0] - S[1][1] - S[2][2];
  n[1][2] = n[2][1] = S[0][1] + S[1][0];
  n[1][3] = n[3][1] = S[2][0] + S[0][2];
  n[2][2] = -S[0][0] + S[1][1] - S[2][2];
  n[2][3] = n[3][2] = S[1][2] + S[2][1];
  n[3][3] = -S[0][0] - S[1][1] + S[2][2];

  std::array<double, 4> evals;
  std::array<std::array<double, 4>, 4> evecs;
  detail::jacobi_eigen4(n, evals, evecs);
  int best = 0;
  for (int i = 1; i < 4; ++i)
    if (evals[i] > evals[best]) best = i;

  const Quat q = Quat{evecs[0][best], evecs[1][best], evecs[2][best], evecs[3][best]}.normalized();
  RigidTransform rt;
  rt.rotation = q.to_matrix();
  rt.translation = cd - rt.rotation * cs;
  return rt;
}

/// Absolute trajectory error: RMSE of position residuals after optimal rigid
/// alignment of the timestamp-matched estimated positions onto ground truth.
/// No scale correction: RGB-D trajectories are metric.
inline double ate_rmse(const Trajectory& est, const Trajectory& gt, double match_tol = 0.02) {
  std::vector<double> ts_est(est.size()), ts_gt(gt.size());
  for (std::size_t i = 0; i < est.size(); ++i) ts_est[i] = est.entries[i].timestamp;
  for (std::size_t j = 0; j < gt.size(); ++j) ts_gt[j] = gt.entries[j].timestamp;
  const auto pairs = associate_timestamps(ts_est, ts_gt, match_tol);
  if (pairs.size() < 3)
    throw InsufficientOverlapError("ate_rmse: fewer than 3 timestamp-matched pose pairs");

  std::vector<Vec3> p_est, p_gt;
  p_est.reserve(pairs.size());
  p_gt.reserve(pairs.size());
  for (const auto& [i, j] : pairs) {
    p_est.push_back(est.entries[i].pose.translation);
    p_gt.push_back(gt.entries[j].pose.translation);
  }
  const RigidTransform rt = align_rigid(p_est, p_gt);
  double sq = 0.0;
  for (std::size_t i = 0; i < p_est.size(); ++i) {
    const Vec3 r = rt.apply(p_est[i]) - p_gt[i];
    sq += dot(r, r);
  }
  return std::sqrt(sq / static_cast<double>(p_est.size()));
}

// ---------------------------------------------------------------------------
// Image metrics
// ---------------------------------------------------------------------------

inline constexpr double kPsnrCapDb = 100.0;

/// Peak signal-to-noise ratio over all channels of [0,1] images, capped so
/// identical images aggregate cleanly.
inline double psnr(const ImageD& rendered, const ImageD& reference) {
  if (!rendered.same_shape(reference)) throw DimensionError("psnr: image shape mismatch");
  double mse = 0.0;
  for (std::size_t i = 0; i < rendered.data.size(); ++i) {
    const double d = rendered.data[i] - reference.data[i];
    mse += d * d;
  }
  mse /= static_cast<double>(rendered.data.size());
  if (mse <= 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

/// RMSE over pixels where both depths are valid (> 0) and, when a silhouette
/// is supplied, the render actually covers the pixel.
inline double depth_rmse(const ImageD& rendered, const ImageD& reference,
                         const ImageD* silhouette = nullptr, double tau_vis = 0.99) {
  if (!rendered.same_shape(reference)) throw DimensionError("depth_rmse: image shape mismatch");
  double sq = 0.0;
  std::size_t count = 0;
  for (int y = 0; y < rendered.height; ++y) {
    for (int x = 0; x < rendered.width; ++x) {
      if (!(rendered.at(x, y) > 0.0) || !(reference.at(x, y) > 0.0)) continue;
      if (silhouette && !(silhouette->at(x, y) > tau_vis)) continue;
      const double d = rendered.at(x, y) - reference.at(x, y);
      sq += d * d;
      ++count;
    }
  }
  if (count == 0) throw UndefinedMetricError("depth_rmse: no valid pixels");
  return std::sqrt(sq / static_cast<double>(count));
}

namespace detail {

inline ImageD to_gray(const ImageD& img) {
  if (img.channels == 1) return img;
  ImageD g(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      g.at(x, y) = 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
  return g;
}

inline std::vector<double> gaussian_kernel11() {
  std::vector<double> k(11);
  const double sigma = 1.5;
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    const double d = i - 5.0;
    k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Separable valid-region convolution with an odd 1-D kernel.
inline ImageD filter_valid(const ImageD& img, const std::vector<double>& k) {
  const int r = static_cast<int>(k.size()) / 2;
  ImageD tmp(img.width - 2 * r, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < tmp.width; ++x) {
      double s = 0.0;
      for (int i = 0; i < static_cast<int>(k.size()); ++i) s += k[i] * img.at(x + i, y);
      tmp.at(x, y) = s;
    }
  ImageD out(tmp.width, img.height - 2 * r, 1);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      double s = 0.0;
      for (int i = 0; i < static_cast<int>(k.size()); ++i) s += k[i] * tmp.at(x, y + i);
      out.at(x, y) = s;
    }
  return out;
}

struct SsimTerms {
  double mean_ssim = 0.0;  // full SSIM (luminance * contrast-structure)
  double mean_cs = 0.0;    // contrast-structure only, for the multi-scale variant
};

inline SsimTerms ssim_terms(const ImageD& a_in, const ImageD& b_in) {
  const ImageD a = to_gray(a_in);
  const ImageD b = to_gray(b_in);
  if (a.width < 11 || a.height < 11)
    throw DimensionError("ssim: images must be at least 11x11");

  const auto k = gaussian_kernel11();
  ImageD aa(a.width, a.height, 1), bb(a.width, a.height, 1), ab(a.width, a.height, 1);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    aa.data[i] = a.data[i] * a.data[i];
    bb.data[i] = b.data[i] * b.data[i];
    ab.data[i] = a.data[i] * b.data[i];
  }
  const ImageD mu_a = filter_valid(a, k);
  const ImageD mu_b = filter_valid(b, k);
  const ImageD m_aa = filter_valid(aa, k);
  const ImageD m_bb = filter_valid(bb, k);
  const ImageD m_ab = filter_valid(ab, k);

  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  double sum_ssim = 0.0, sum_cs = 0.0;
  for (std::size_t i = 0; i < mu_a.data.size(); ++i) {
    const double ma = mu_a.data[i], mb = mu_b.data[i];
    const double va = m_aa.data[i] - ma * ma;
    const double vb = m_bb.data[i] - mb * mb;
    const double cov = m_ab.data[i] - ma * mb;
    const double cs = (2.0 * cov + c2) / (va + vb + c2);
    const double lum = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    sum_ssim += lum * cs;
    sum_cs += cs;
  }
  const double n = static_cast<double>(mu_a.data.size());
  return {sum_ssim / n, sum_cs / n};
}

inline ImageD downsample2(const ImageD& img) {
  ImageD out(img.width / 2, img.height / 2, img.channels);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        out.at(x, y, c) = 0.25 * (img.at(2 * x, 2 * y, c) + img.at(2 * x + 1, 2 * y, c) +
                                  img.at(2 * x, 2 * y + 1, c) + img.at(2 * x + 1, 2 * y + 1, c));
  return out;
}

}  // namespace detail

/// Single-scale SSIM: 11x11 Gaussian window, sigma 1.5, C1=(0.01)^2,
/// C2=(0.03)^2 on the [0,1] range, mean over the valid filter region.
/// Color inputs are converted to luma first.
inline double ssim(const ImageD& rendered, const ImageD& reference) {
  if (!rendered.same_shape(reference)) throw DimensionError("ssim: image shape mismatch");
  return detail::ssim_terms(rendered, reference).mean_ssim;
}

/// Five-level multi-scale SSIM with the standard level weights.
inline double ms_ssim(const ImageD& rendered, const ImageD& reference) {
  if (!rendered.same_shape(reference)) throw DimensionError("ms_ssim: image shape mismatch");
  static constexpr std::array<double, 5> weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  ImageD a = detail::to_gray(rendered);
  ImageD b = detail::to_gray(reference);
  double result = 1.0;
  for (std::size_t level = 0; level < weights.size(); ++level) {
    const detail::SsimTerms t = detail::ssim_terms(a, b);
    if (level + 1 == weights.size()) {
      result *= std::pow(std::abs(t.mean_ssim), weights[level]);
    } else {
      result *= std::pow(std::abs(t.mean_cs), weights[level]);
      a = detail::downsample2(a);
      b = detail::downsample2(b);
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Run-level report
// ---------------------------------------------------------------------------

struct EvalReport {
  double ate_rmse = 0.0;        // meters
  double psnr_mean = 0.0;       // dB
  double depth_rmse_mean = 0.0; // meters
  double ssim_mean = 0.0;

  struct PerFrame {
    double timestamp = 0.0;
    double psnr = 0.0;
    double depth_rmse = 0.0;
    double ssim = 0.0;
  };
  std::vector<PerFrame> frames;
};

inline void write_report_csv(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open report csv: " + path.string());
  os << "timestamp,psnr_db,depth_rmse_m,ssim\n";
  char buf[160];
  for (const auto& f : r.frames) {
    std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f\n", f.timestamp, f.psnr, f.depth_rmse,
                  f.ssim);
    os << buf;
  }
}

inline void write_report_json(const EvalReport& r, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open report json: " + path.string());
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "{\n  \"ate_rmse\": %.9f,\n  \"psnr_mean\": %.6f,\n"
                "  \"depth_rmse_mean\": %.9f,\n  \"ssim_mean\": %.6f\n}\n",
                r.ate_rmse, r.psnr_mean, r.depth_rmse_mean, r.ssim_mean);
  os << buf;
}

// ---------------------------------------------------------------------------
// Diagnostic plots
// ---------------------------------------------------------------------------

namespace detail {

inline void draw_line(ImageD& img, double x0, double y0, double x1, double y1, Vec3 color) {
  const int steps = std::max(2, static_cast<int>(std::ceil(std::hypot(x1 - x0, y1 - y0) * 2)));
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
    const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
    if (x < 0 || x >= img.width || y < 0 || y >= img.height) continue;
    img.at(x, y, 0) = color.x;
    img.at(x, y, 1) = color.y;
    img.at(x, y, 2) = color.z;
  }
}

}  // namespace detail

/// Top-down (x,z) view of estimated vs ground-truth camera positions;
/// estimate in red, ground truth in green.
inline ImageD plot_trajectory_topdown(const Trajectory& est, const Trajectory& gt, int size = 512) {
  ImageD img(size, size, 3, 1.0);
  double min_x = 1e300, max_x = -1e300, min_z = 1e300, max_z = -1e300;
  for (const auto* traj : {&est, &gt}) {
    for (const auto& e : traj->entries) {
      min_x = std::min(min_x, e.pose.translation.x);
      max_x = std::max(max_x, e.pose.translation.x);
      min_z = std::min(min_z, e.pose.translation.z);
      max_z = std::max(max_z, e.pose.translation.z);
    }
  }
  const double span = std::max({max_x - min_x, max_z - min_z, 1e-6});
  const double margin = 0.05 * size;
  const double scale = (size - 2 * margin) / span;
  const auto to_px = [&](Vec3 p) {
    return Vec2{margin + (p.x - min_x) * scale, margin + (p.z - min_z) * scale};
  };
  const auto draw = [&](const Trajectory& t, Vec3 color) {
    for (std::size_t i = 1; i < t.size(); ++i) {
      const Vec2 a = to_px(t.entries[i - 1].pose.translation);
      const Vec2 b = to_px(t.entries[i].pose.translation);
      detail::draw_line(img, a.x, a.y, b.x, b.y, color);
    }
  };
  draw(gt, {0.0, 0.6, 0.0});
  draw(est, {0.85, 0.0, 0.0});
  return img;
}

/// Line chart of a per-frame metric series.
inline ImageD plot_series(const std::vector<double>& values, int width = 640, int height = 240) {
  ImageD img(width, height, 3, 1.0);
  if (values.size() < 2) return img;
  double lo = values[0], hi = values[0];
  for (double v : values) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (hi - lo < 1e-12) hi = lo + 1.0;
  const auto to_px = [&](std::size_t i, double v) {
    return Vec2{static_cast<double>(i) / (values.size() - 1) * (width - 1),
                (1.0 - (v - lo) / (hi - lo)) * (height - 1)};
  };
  for (std::size_t i = 1; i < values.size(); ++i) {
    const Vec2 a = to_px(i - 1, values[i - 1]);
    const Vec2 b = to_px(i, values[i]);
    detail::draw_line(img, a.x, a.y, b.x, b.y, {0.1, 0.2, 0.8});
  }
  return img;
}

}  // namespace gslam
