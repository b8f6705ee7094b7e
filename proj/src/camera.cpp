#include "voxlift/camera.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "voxlift/error.hpp"

namespace voxlift {

CameraPose make_pose(double azimuth, double elevation, double radius, double fov_y) {
  if (!(radius > 0.0)) throw InvalidArgument("make_pose: radius must be positive");
  if (!(std::abs(elevation) < kPi / 2)) throw InvalidArgument("make_pose: |elevation| must be < pi/2");
  if (!(fov_y > 0.0 && fov_y < kPi)) throw InvalidArgument("make_pose: fov_y must lie in (0, pi)");

  CameraPose pose;
  const double ce = std::cos(elevation);
  pose.position = Vec3{ce * std::sin(azimuth), std::sin(elevation), ce * std::cos(azimuth)} * radius;
  const Vec3 back = normalized(pose.position);
  const Vec3 right = normalized(cross(Vec3{0.0, 1.0, 0.0}, back));
  const Vec3 up = cross(back, right);
  pose.orientation.cols = {right, up, back};
  pose.fov_y = fov_y;
  return pose;
}

double pose_azimuth(const CameraPose& pose) { return std::atan2(pose.position.x, pose.position.z); }

double pose_elevation(const CameraPose& pose) {
  return std::asin(std::clamp(pose.position.y / norm(pose.position), -1.0, 1.0));
}

CameraPose sample_pose(Rng& rng, const PoseDistribution& cfg) {
  if (cfg.elevation_min > cfg.elevation_max) throw InvalidArgument("sample_pose: empty elevation range");
  std::uniform_real_distribution<double> az(0.0, 2.0 * kPi);
  const double azimuth = az(rng);
  double elevation = cfg.elevation_min;
  if (cfg.elevation_max > cfg.elevation_min) {
    std::uniform_real_distribution<double> el(cfg.elevation_min, cfg.elevation_max);
    elevation = el(rng);
  }
  return make_pose(azimuth, elevation, cfg.radius, cfg.fov_y);
}

Vec3 camera_direction(const CameraPose& pose, int width, int height, double px, double py) {
  const SensorWindow& w = pose.window;
  const double u = w.u0 + px / width * (w.u1 - w.u0);
  const double v = w.v0 + py / height * (w.v1 - w.v0);
  const double aspect = w.aspect > 0.0 ? w.aspect : static_cast<double>(width) / height;
  const double tan_half = std::tan(pose.fov_y / 2);
  return {(2.0 * u - 1.0) * tan_half * aspect, (1.0 - 2.0 * v) * tan_half, -1.0};
}

RayBundle generate_rays(const CameraPose& pose, int width, int height) {
  if (width < 1 || height < 1) throw InvalidArgument("generate_rays: raster must be at least 1x1");
  RayBundle rays;
  rays.width = width;
  rays.height = height;
  rays.origins.assign(static_cast<std::size_t>(width) * height, pose.position);
  rays.directions.resize(rays.origins.size());
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Vec3 d = camera_direction(pose, width, height, x + 0.5, y + 0.5);
      rays.directions[rays.index(x, y)] = normalized(pose.orientation * d);
    }
  }
  return rays;
}

std::size_t SparseDepthMap::valid_count() const {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{1}));
}

SparseDepthMap project_depth(const PointCloud& cloud, const CameraPose& pose, int width, int height) {
  if (cloud.points.empty()) throw InvalidArgument("project_depth: empty point cloud");
  if (width < 1 || height < 1) throw InvalidArgument("project_depth: raster must be at least 1x1");

  SparseDepthMap map;
  map.width = width;
  map.height = height;
  map.depth.assign(static_cast<std::size_t>(width) * height, 0.0);
  map.valid.assign(map.depth.size(), 0);

  const SensorWindow& w = pose.window;
  const double aspect = w.aspect > 0.0 ? w.aspect : static_cast<double>(width) / height;
  const double tan_half = std::tan(pose.fov_y / 2);
  for (const auto& p : cloud.points) {
    const Vec3 cam = pose.orientation.transpose_mul(p.position - pose.position);
    const double depth = -cam.z;
    if (!(depth > 0.0)) continue;
    const double ndc_x = cam.x / (depth * tan_half * aspect);
    const double ndc_y = cam.y / (depth * tan_half);
    const double u = (ndc_x + 1.0) / 2.0;
    const double v = (1.0 - ndc_y) / 2.0;
    const double px = std::floor((u - w.u0) / (w.u1 - w.u0) * width);
    const double py = std::floor((v - w.v0) / (w.v1 - w.v0) * height);
    if (px < 0.0 || py < 0.0 || px >= width || py >= height) continue;
    const auto i = map.index(static_cast<int>(px), static_cast<int>(py));
    if (!map.valid[i] || depth < map.depth[i]) {
      map.depth[i] = depth;
      map.valid[i] = 1;
    }
  }
  return map;
}

PointCloud normalize_cloud(const PointCloud& cloud) {
  if (cloud.points.empty()) throw InvalidArgument("normalize_cloud: empty point cloud");
  Vec3 centroid;
  for (const auto& p : cloud.points) centroid = centroid + p.position;
  centroid = centroid * (1.0 / static_cast<double>(cloud.points.size()));

  double extent = 0.0;
  for (const auto& p : cloud.points) {
    const Vec3 d = p.position - centroid;
    extent = std::max({extent, std::abs(d.x), std::abs(d.y), std::abs(d.z)});
  }
  if (!(extent > 0.0)) throw InvalidArgument("normalize_cloud: all points coincide");

  const double scale = 0.9 / extent;
  PointCloud out = cloud;
  for (auto& p : out.points) p.position = (p.position - centroid) * scale;
  return out;
}

PointCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line) || line.rfind("ply", 0) != 0) throw DecodeError("ply: missing magic");
  std::size_t count = 0;
  bool in_vertex = false;
  std::vector<std::string> props;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt != "ascii") throw DecodeError("ply: only ascii format is supported");
    } else if (word == "element") {
      std::string name;
      ls >> name;
      in_vertex = name == "vertex";
      if (in_vertex) ls >> count;
    } else if (word == "property" && in_vertex) {
      std::string type;
      std::string name;
      ls >> type >> name;
      props.push_back(name);
    } else if (word == "end_header") {
      break;
    }
  }
  auto find = [&](const char* name) -> int {
    auto it = std::find(props.begin(), props.end(), name);
    return it == props.end() ? -1 : static_cast<int>(it - props.begin());
  };
  const int ix = find("x"), iy = find("y"), iz = find("z");
  const int ir = find("red"), ig = find("green"), ib = find("blue");
  if (ix < 0 || iy < 0 || iz < 0) throw DecodeError("ply: vertex element lacks x/y/z");

  PointCloud cloud;
  cloud.points.reserve(count);
  std::vector<double> values(props.size());
  for (std::size_t n = 0; n < count; ++n) {
    for (auto& v : values) {
      if (!(in >> v)) throw DecodeError("ply: truncated vertex data");
    }
    ColoredPoint p;
    p.position = {values[ix], values[iy], values[iz]};
    if (!std::isfinite(p.position.x) || !std::isfinite(p.position.y) || !std::isfinite(p.position.z))
      throw DecodeError("ply: non-finite coordinate");
    if (ir >= 0 && ig >= 0 && ib >= 0) p.color = {values[ir] / 255.0, values[ig] / 255.0, values[ib] / 255.0};
    cloud.points.push_back(p);
  }
  return cloud;
}

void save_ply(const PointCloud& cloud, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "ply\nformat ascii 1.0\nelement vertex " << cloud.points.size()
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  out.precision(std::numeric_limits<float>::max_digits10);
  for (const auto& p : cloud.points) {
    out << static_cast<float>(p.position.x) << ' ' << static_cast<float>(p.position.y) << ' '
        << static_cast<float>(p.position.z);
    for (double c : p.color) out << ' ' << std::lround(std::clamp(c, 0.0, 1.0) * 255.0);
    out << '\n';
  }
}

PointCloud sphere_shell_cloud(std::size_t count, double radius, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  PointCloud cloud;
  cloud.points.reserve(count);
  while (cloud.points.size() < count) {
    const Vec3 v{n(rng), n(rng), n(rng)};
    const double len = norm(v);
    if (len < 1e-12) continue;
    cloud.points.push_back({v * (radius / len), {0.5, 0.5, 0.5}});
  }
  return cloud;
}

}  // namespace voxlift
