#pragma once

#include <map>
#include <vector>

#include "voxlift/diffusion.hpp"
#include "voxlift/field.hpp"
#include "voxlift/sds.hpp"

namespace voxlift::fixture {

/// Bundled ground-truth object: a large sphere with a smaller sphere attached
/// off-axis, coloured by position, on an otherwise empty lattice.
VoxelRadianceField ground_truth_field(GridResolution res = {});

/// Eight training views: azimuth every 45 degrees, elevation alternating 0 and 30 degrees.
std::vector<PoseAngles> training_views();

/// Four views between the training azimuths at 15 degrees elevation.
std::vector<PoseAngles> held_out_views();

/// Deterministic renders used as oracle targets and for evaluation.
RenderSettings evaluation_settings(int samples_per_ray = 128);

std::map<PoseKey, Image> render_targets(const VoxelRadianceField& field, const std::vector<PoseAngles>& views,
                                        const PoseDistribution& poses, int size, int samples_per_ray = 128);

/// Mean PSNR of `field` against `reference` over the given views.
double mean_psnr(const VoxelRadianceField& field, const VoxelRadianceField& reference,
                 const std::vector<PoseAngles>& views, const PoseDistribution& poses, int size,
                 int samples_per_ray = 128);

/// Point cloud sampled from dense lattice nodes of a field (density above `min_density`).
PointCloud sample_cloud(const VoxelRadianceField& field, std::size_t max_points, double min_density,
                        std::uint64_t seed);

}  // namespace voxlift::fixture
