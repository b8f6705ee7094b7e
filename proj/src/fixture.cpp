#include "voxlift/fixture.hpp"

#include <algorithm>
#include <cmath>

namespace voxlift::fixture {

namespace {

constexpr Vec3 kBodyCenter{0.0, -0.05, 0.0};
constexpr double kBodyRadius = 0.5;
constexpr Vec3 kHeadCenter{0.35, 0.35, 0.3};
constexpr double kHeadRadius = 0.25;

}  // namespace

VoxelRadianceField ground_truth_field(GridResolution res) {
  VoxelRadianceField field(res, Aabb{});
  for (int z = 0; z < res.nz; ++z) {
    for (int y = 0; y < res.ny; ++y) {
      for (int x = 0; x < res.nx; ++x) {
        const Vec3 p = field.node_position(x, y, z);
        const double body = norm(p - kBodyCenter) - kBodyRadius;
        const double head = norm(p - kHeadCenter) - kHeadRadius;
        const double sd = std::min(body, head);
        // raw density ramps from -6 outside to 30 inside over a thin shell
        const double s = std::clamp(0.5 - sd / 0.08, 0.0, 1.0);
        const auto i = field.index(x, y, z);
        field.density()[i] = static_cast<float>(-6.0 + 36.0 * s);

        Rgb c;
        if (head < body) {
          c = {0.9, 0.35, 0.2};
        } else {
          c = {0.2 + 0.3 * (p.x + 1.0), 0.3 + 0.25 * (p.y + 1.0), 0.8 - 0.3 * (p.z + 1.0)};
        }
        for (int k = 0; k < 3; ++k) field.color()[3 * i + k] = static_cast<float>(std::clamp(c[k], 0.0, 1.0));
      }
    }
  }
  return field;
}

std::vector<PoseAngles> training_views() {
  std::vector<PoseAngles> views;
  for (int k = 0; k < 8; ++k) views.push_back({deg2rad(45.0 * k), deg2rad(k % 2 == 0 ? 0.0 : 30.0)});
  return views;
}

std::vector<PoseAngles> held_out_views() {
  std::vector<PoseAngles> views;
  for (int k = 0; k < 4; ++k) views.push_back({deg2rad(22.5 + 90.0 * k), deg2rad(15.0)});
  return views;
}

RenderSettings evaluation_settings(int samples_per_ray) {
  RenderSettings s;
  s.samples_per_ray = samples_per_ray;
  return s;
}

std::map<PoseKey, Image> render_targets(const VoxelRadianceField& field, const std::vector<PoseAngles>& views,
                                        const PoseDistribution& poses, int size, int samples_per_ray) {
  std::map<PoseKey, Image> targets;
  for (const auto& v : views) {
    const CameraPose pose = make_pose(v.azimuth, v.elevation, poses.radius, poses.fov_y);
    targets.emplace(PoseKey::from_pose(pose), render(field, pose, size, size, evaluation_settings(samples_per_ray)).image);
  }
  return targets;
}

double mean_psnr(const VoxelRadianceField& field, const VoxelRadianceField& reference,
                 const std::vector<PoseAngles>& views, const PoseDistribution& poses, int size,
                 int samples_per_ray) {
  double total = 0.0;
  const RenderSettings s = evaluation_settings(samples_per_ray);
  for (const auto& v : views) {
    const CameraPose pose = make_pose(v.azimuth, v.elevation, poses.radius, poses.fov_y);
    total += psnr(render(field, pose, size, size, s).image, render(reference, pose, size, size, s).image);
  }
  return total / static_cast<double>(views.size());
}

PointCloud sample_cloud(const VoxelRadianceField& field, std::size_t max_points, double min_density,
                        std::uint64_t seed) {
  const auto& r = field.resolution();
  PointCloud dense;
  for (int z = 0; z < r.nz; ++z) {
    for (int y = 0; y < r.ny; ++y) {
      for (int x = 0; x < r.nx; ++x) {
        const auto i = field.index(x, y, z);
        if (softplus(field.density()[i]) < min_density) continue;
        Rgb c;
        for (int k = 0; k < 3; ++k) c[k] = color_activation(field.color()[3 * i + k]);
        dense.points.push_back({field.node_position(x, y, z), c});
      }
    }
  }
  if (dense.points.size() <= max_points) return dense;
  Rng rng(seed);
  std::shuffle(dense.points.begin(), dense.points.end(), rng);
  dense.points.resize(max_points);
  return dense;
}

}  // namespace voxlift::fixture
