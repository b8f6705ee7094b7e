#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <vector>

#include "voxlift/geometry.hpp"
#include "voxlift/image.hpp"

namespace voxlift {

using Rng = std::mt19937_64;

/// Sub-rectangle of the full image plane in normalized [0,1] coordinates
/// (u to the right, v downward). A cropped input photograph is rendered through
/// the window its crop box covers. `aspect` is the width/height of the full
/// sensor; 0 means "use the raster's own aspect".
struct SensorWindow {
  double u0 = 0.0;
  double v0 = 0.0;
  double u1 = 1.0;
  double v1 = 1.0;
  double aspect = 0.0;

  bool operator==(const SensorWindow&) const = default;
};

/// Pinhole camera. Orientation columns are the camera's right, up and back
/// axes in world space; the camera looks along its -Z (back) axis.
struct CameraPose {
  Vec3 position;
  Mat3 orientation;
  double fov_y = deg2rad(60.0);
  SensorWindow window;

  Vec3 forward() const { return -orientation.cols[2]; }
  bool operator==(const CameraPose&) const = default;
};

/// Orbit pose looking at the origin with +Y as up reference.
/// position = radius * (cos el sin az, sin el, cos el cos az).
CameraPose make_pose(double azimuth, double elevation, double radius, double fov_y);

/// Spherical angles of a pose's position (radians).
double pose_azimuth(const CameraPose& pose);
double pose_elevation(const CameraPose& pose);

struct PoseDistribution {
  double elevation_min = deg2rad(-15.0);
  double elevation_max = deg2rad(45.0);
  double radius = 2.3;
  double fov_y = deg2rad(60.0);
};

/// Azimuth uniform on [0, 2pi), elevation uniform on the configured range.
CameraPose sample_pose(Rng& rng, const PoseDistribution& cfg);

struct RayBundle {
  int width = 0;
  int height = 0;
  std::vector<Vec3> origins;
  std::vector<Vec3> directions;  // unit length

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

/// One ray per pixel through the pixel centre.
RayBundle generate_rays(const CameraPose& pose, int width, int height);

/// Camera-space direction through raster pixel coordinate (px, py), where
/// pixel centres sit at half-integers. Not normalized; z = -1.
Vec3 camera_direction(const CameraPose& pose, int width, int height, double px, double py);

struct ColoredPoint {
  Vec3 position;
  Rgb color{0.0, 0.0, 0.0};
};

struct PointCloud {
  std::vector<ColoredPoint> points;
};

struct SparseDepthMap {
  int width = 0;
  int height = 0;
  std::vector<double> depth;  // distance along the optical axis
  std::vector<std::uint8_t> valid;

  std::size_t index(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
  std::size_t valid_count() const;
};

/// Single-pixel splatting with a z-buffer; the nearest point wins.
SparseDepthMap project_depth(const PointCloud& cloud, const CameraPose& pose, int width, int height);

/// Centres the cloud on its centroid and scales it so that max |coordinate| = 0.9.
PointCloud normalize_cloud(const PointCloud& cloud);

// ASCII PLY with float x,y,z and uchar red,green,blue vertex properties.
PointCloud load_ply(const std::filesystem::path& path);
void save_ply(const PointCloud& cloud, const std::filesystem::path& path);

/// Points on the sphere of the given radius, deterministic in the seed.
PointCloud sphere_shell_cloud(std::size_t count, double radius, std::uint64_t seed);

}  // namespace voxlift
