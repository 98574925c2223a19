#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace gslam {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class BehindCameraError : public Error {
 public:
  using Error::Error;
};
class InvalidDepthError : public Error {
 public:
  using Error::Error;
};
class ConfigError : public Error {
 public:
  using Error::Error;
};
class EmptyInitializationError : public Error {
 public:
  using Error::Error;
};
class UntrackableFrameError : public Error {
 public:
  using Error::Error;
};
class DatasetFormatError : public Error {
 public:
  using Error::Error;
};
class CheckpointFormatError : public Error {
 public:
  using Error::Error;
};
class InsufficientOverlapError : public Error {
 public:
  using Error::Error;
};
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};
class DegenerateParallaxError : public Error {
 public:
  using Error::Error;
};
class DimensionError : public Error {
 public:
  using Error::Error;
};
class InternalError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Small fixed-size linear algebra
// ---------------------------------------------------------------------------

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 v) { return {s * v.x, s * v.y}; }
inline double norm(Vec2 v) { return std::sqrt(v.x * v.x + v.y * v.y); }

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  double& operator[](int i) { return (&x)[i]; }
  double operator[](int i) const { return (&x)[i]; }
};

inline Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
inline Vec3 operator*(double s, Vec3 v) { return {s * v.x, s * v.y, s * v.z}; }
inline Vec3& operator+=(Vec3& a, Vec3 b) {
  a.x += b.x;
  a.y += b.y;
  a.z += b.z;
  return a;
}
inline Vec3& operator-=(Vec3& a, Vec3 b) {
  a.x -= b.x;
  a.y -= b.y;
  a.z -= b.z;
  return a;
}
inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(Vec3 a, Vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(Vec3 v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(Vec3 v) {
  const double n = norm(v);
  return n > 0.0 ? (1.0 / n) * v : v;
}

/// 3x3 matrix, row-major.
struct Mat3 {
  double m[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};

  static Mat3 identity() { return {}; }

  Vec3 row(int i) const { return {m[i][0], m[i][1], m[i][2]}; }
  Vec3 col(int j) const { return {m[0][j], m[1][j], m[2][j]}; }

  Mat3 transposed() const {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.m[i][j] = m[j][i];
    return r;
  }
};

inline Vec3 operator*(const Mat3& a, Vec3 v) {
  return {dot(a.row(0), v), dot(a.row(1), v), dot(a.row(2), v)};
}

inline Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r.m[i][j] = dot(a.row(i), b.col(j));
  return r;
}

/// Unit quaternion, scalar-first.
struct Quat {
  double w = 1.0;
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  static Quat identity() { return {}; }

  /// Rotation of `angle = |axis_angle|` radians about `axis_angle / |axis_angle|`.
  static Quat from_axis_angle(Vec3 axis_angle) {
    const double theta = gslam::norm(axis_angle);
    if (theta < 1e-12) {
      // First-order expansion keeps tiny gradient steps exact enough.
      Quat q{1.0, 0.5 * axis_angle.x, 0.5 * axis_angle.y, 0.5 * axis_angle.z};
      return q.normalized();
    }
    const double half = 0.5 * theta;
    const double s = std::sin(half) / theta;
    return {std::cos(half), s * axis_angle.x, s * axis_angle.y, s * axis_angle.z};
  }

  Quat conjugate() const { return {w, -x, -y, -z}; }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  Quat normalized() const {
    const double n = norm();
    return {w / n, x / n, y / n, z / n};
  }

  Mat3 to_matrix() const {
    Mat3 r;
    r.m[0][0] = 1 - 2 * (y * y + z * z);
    r.m[0][1] = 2 * (x * y - w * z);
    r.m[0][2] = 2 * (x * z + w * y);
    r.m[1][0] = 2 * (x * y + w * z);
    r.m[1][1] = 1 - 2 * (x * x + z * z);
    r.m[1][2] = 2 * (y * z - w * x);
    r.m[2][0] = 2 * (x * z - w * y);
    r.m[2][1] = 2 * (y * z + w * x);
    r.m[2][2] = 1 - 2 * (x * x + y * y);
    return r;
  }

  Vec3 rotate(Vec3 v) const {
    // q v q^-1 via the two-cross-product form.
    const Vec3 u{x, y, z};
    const Vec3 t = 2.0 * cross(u, v);
    return v + w * t + cross(u, t);
  }
};

inline Quat operator*(const Quat& a, const Quat& b) {
  return {a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
          a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
          a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
          a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w};
}

/// Shepperd's method; assumes `m` is a proper rotation.
inline Quat quat_from_matrix(const Mat3& r) {
  const double tr = r.m[0][0] + r.m[1][1] + r.m[2][2];
  Quat q;
  if (tr > 0.0) {
    double s = std::sqrt(tr + 1.0) * 2.0;
    q.w = 0.25 * s;
    q.x = (r.m[2][1] - r.m[1][2]) / s;
    q.y = (r.m[0][2] - r.m[2][0]) / s;
    q.z = (r.m[1][0] - r.m[0][1]) / s;
  } else if (r.m[0][0] > r.m[1][1] && r.m[0][0] > r.m[2][2]) {
    double s = std::sqrt(1.0 + r.m[0][0] - r.m[1][1] - r.m[2][2]) * 2.0;
    q.w = (r.m[2][1] - r.m[1][2]) / s;
    q.x = 0.25 * s;
    q.y = (r.m[0][1] + r.m[1][0]) / s;
    q.z = (r.m[0][2] + r.m[2][0]) / s;
  } else if (r.m[1][1] > r.m[2][2]) {
    double s = std::sqrt(1.0 + r.m[1][1] - r.m[0][0] - r.m[2][2]) * 2.0;
    q.w = (r.m[0][2] - r.m[2][0]) / s;
    q.x = (r.m[0][1] + r.m[1][0]) / s;
    q.y = 0.25 * s;
    q.z = (r.m[1][2] + r.m[2][1]) / s;
  } else {
    double s = std::sqrt(1.0 + r.m[2][2] - r.m[0][0] - r.m[1][1]) * 2.0;
    q.w = (r.m[1][0] - r.m[0][1]) / s;
    q.x = (r.m[0][2] + r.m[2][0]) / s;
    q.y = (r.m[1][2] + r.m[2][1]) / s;
    q.z = 0.25 * s;
  }
  return q.normalized();
}

// ---------------------------------------------------------------------------
// Deterministic RNG (splitmix64). Self-contained so that seeded results are
// identical across standard libraries and platforms.
// ---------------------------------------------------------------------------

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

// ---------------------------------------------------------------------------
// Deterministic parallel helper: [0, n) is split into `threads` contiguous
// chunks, one std::thread each. Work items must write to disjoint state.
// ---------------------------------------------------------------------------

inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (threads <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t lo = n * w / workers;
    const std::size_t hi = n * (w + 1) / workers;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace gslam
