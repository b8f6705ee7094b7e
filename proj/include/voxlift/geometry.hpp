#pragma once

#include <algorithm>
#include <array>
#include <cmath>

namespace voxlift {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3 operator-() const { return {-x, -y, -z}; }
  constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  bool operator==(const Vec3&) const = default;
};

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) { return v * (1.0 / norm(v)); }

/// 3x3 matrix stored by columns.
struct Mat3 {
  std::array<Vec3, 3> cols{};

  Vec3 operator*(const Vec3& v) const { return cols[0] * v.x + cols[1] * v.y + cols[2] * v.z; }
  Vec3 transpose_mul(const Vec3& v) const { return {dot(cols[0], v), dot(cols[1], v), dot(cols[2], v)}; }
  double determinant() const { return dot(cols[0], cross(cols[1], cols[2])); }
  bool operator==(const Mat3&) const = default;
};

/// Axis-aligned box.
struct Aabb {
  Vec3 min{-1.0, -1.0, -1.0};
  Vec3 max{1.0, 1.0, 1.0};

  bool contains(const Vec3& p) const {
    return p.x >= min.x && p.y >= min.y && p.z >= min.z && p.x <= max.x && p.y <= max.y && p.z <= max.z;
  }
  bool operator==(const Aabb&) const = default;
};

/// Slab test. Returns false when the ray misses; otherwise [t_near, t_far] with t_near >= 0.
inline bool intersect(const Aabb& box, const Vec3& origin, const Vec3& dir, double& t_near, double& t_far) {
  t_near = 0.0;
  t_far = INFINITY;
  for (int a = 0; a < 3; ++a) {
    const double o = origin[a];
    const double d = dir[a];
    const double lo = box.min[a];
    const double hi = box.max[a];
    if (d == 0.0) {
      if (o < lo || o > hi) return false;
      continue;
    }
    double t0 = (lo - o) / d;
    double t1 = (hi - o) / d;
    if (t0 > t1) std::swap(t0, t1);
    t_near = std::max(t_near, t0);
    t_far = std::min(t_far, t1);
    if (t_near > t_far) return false;
  }
  return true;
}

inline constexpr double kPi = 3.14159265358979323846;
constexpr double deg2rad(double d) { return d * kPi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / kPi; }

}  // namespace voxlift
