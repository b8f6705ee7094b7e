#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "voxlift/camera.hpp"
#include "voxlift/field.hpp"
#include "voxlift/image.hpp"

namespace voxlift {

struct RenderSettings {
  int samples_per_ray = 128;
  Rgb background = kWhite;
  bool jitter = false;
  std::uint64_t seed = 0;
  /// Rays stop marching once transmittance drops below this; 0 marches every sample.
  double min_transmittance = 0.0;

  void validate() const;
};

struct RenderResult {
  Image image;
  std::vector<double> transmittance;  // per pixel, light reaching the background
};

/// Parameter gradients, shaped like the field's density and colour arrays.
struct FieldGradients {
  std::vector<double> density;
  std::vector<double> color;

  static FieldGradients zeros_like(const VoxelRadianceField& field);
  void add(const FieldGradients& other);
  void scale(double s);
  bool all_zero() const;
  bool all_finite() const;
};

/// Emission-absorption rendering of the field.
///
/// Each ray is clipped to the field bounds and the segment is split into
/// `samples_per_ray` equal bins of length delta. One sample per bin (the bin
/// centre, or a seeded uniform position within the bin when jittering) gives
/// alpha_i = 1 - exp(-sigma_i * delta) and
///   pixel = sum_i T_i alpha_i c_i + T_final * background,  T_i = prod_{j<i} (1 - alpha_j).
/// Rays that miss the bounds see the background. With a positive
/// min_transmittance the sum is truncated after the sample that crosses it.
RenderResult render(const VoxelRadianceField& field, const CameraPose& pose, int width, int height,
                    const RenderSettings& settings);

/// Reverse-mode gradient of render with respect to the raw field parameters,
/// contracted with `upstream` (dLoss/dpixel, row-major H x W x 3). Uses the
/// same sample positions as render with identical settings.
FieldGradients render_backward(const VoxelRadianceField& field, const CameraPose& pose, int width, int height,
                               const RenderSettings& settings, std::span<const double> upstream);

struct PhotometricGradient {
  FieldGradients grad;
  double loss = 0.0;  // weight * sum of squared residuals
};

/// Gradient of weight * ||render - target||^2 in one fused forward/backward pass.
PhotometricGradient photometric_gradient(const VoxelRadianceField& field, const CameraPose& pose,
                                         const Image& target, double weight, const RenderSettings& settings);

/// Runs fn(chunk) for chunk in [0, count) on up to hardware_concurrency threads.
void parallel_for_chunks(int count, const std::function<void(int)>& fn);

}  // namespace voxlift
