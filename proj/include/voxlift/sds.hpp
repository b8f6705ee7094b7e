#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <vector>

#include "voxlift/camera.hpp"
#include "voxlift/diffusion.hpp"
#include "voxlift/field.hpp"
#include "voxlift/render.hpp"

namespace voxlift {

/// Weighting w(t) applied to the noise residual.
enum class WeightMode { Constant, SqrtOneMinusAlphaBar };

struct PoseAngles {
  double azimuth = 0.0;  // radians
  double elevation = 0.0;
};

struct SDSConfig {
  int iterations = 2000;
  double lr_density = 0.02;
  double lr_color = 0.05;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.99;
  double adam_eps = 1e-4;
  WeightMode weight_mode = WeightMode::Constant;
  double t_min_fraction = 0.02;
  double t_max_fraction = 0.98;
  int render_size = 64;
  int samples_per_ray = 128;
  /// Stratified jitter of training-render samples (false = bin midpoints).
  bool jitter = true;
  /// Early ray termination threshold for training renders (0 = exact full march).
  double min_transmittance = 0.0;
  std::uint64_t seed = 0;
  double anchor_weight = 1.0;
  PoseDistribution poses;
  /// Discrete training views. When non-empty each step picks one uniformly;
  /// otherwise poses are drawn from `poses`.
  std::vector<PoseAngles> training_poses;
  /// Activated initial density and colour of the optimized field.
  double init_density = 0.05;
  Rgb init_color{0.5, 0.5, 0.5};
  GridResolution resolution;
  Aabb bounds;

  void validate() const;
};

/// Adam moments for every field parameter.
struct OptimizerState {
  std::vector<double> m_density;
  std::vector<double> v_density;
  std::vector<double> m_color;
  std::vector<double> v_color;
  std::int64_t step = 0;

  static OptimizerState for_field(const VoxelRadianceField& field);
};

struct TraceRecord {
  int iteration = 0;
  double azimuth = 0.0;  // radians
  double elevation = 0.0;
  int t = 0;
  double proxy_loss = 0.0;  // mean squared noise residual over all raster values
  double wall_seconds = 0.0;
};

struct TrainTrace {
  std::vector<TraceRecord> records;

  /// One JSON object per line.
  void write_jsonl(std::ostream& out) const;
  static TrainTrace read_jsonl(std::istream& in);
};

/// Supplies the depth conditioning for a pose.
using DepthProvider = std::function<DepthConditioning(const CameraPose&)>;

/// Extra photometric term tying the render at the input view to the input image.
struct AnchorView {
  CameraPose pose;
  Image image;
  double weight = 1.0;
};

/// Per-step pose, timestep and noise, derived only from (seed, iteration).
struct StepDraw {
  CameraPose pose;
  int t = 0;
  Raster noise;
  std::uint64_t jitter_seed = 0;
};

StepDraw draw_step(const SDSConfig& cfg, const DiffusionSchedule& schedule, int iteration);

double sds_weight(WeightMode mode, const DiffusionSchedule& schedule, int t);

/// Score-distillation gradient for a single draw: render x, noise it, query the
/// backend, and back-propagate w(t) (eps_hat - eps) through the renderer.
struct SdsGradient {
  FieldGradients grad;
  double proxy_loss = 0.0;
};

SdsGradient sds_gradient(const VoxelRadianceField& field, const ScoreBackend& backend,
                         const DiffusionSchedule& schedule, const PromptEmbedding& embedding,
                         const DepthConditioning* depth, const CameraPose& pose, int t, const Raster& noise,
                         const RenderSettings& settings, int size, double weight);

/// Gradient of anchor.weight * sum (render - image)^2 at the anchor pose.
FieldGradients anchor_gradient(const VoxelRadianceField& field, const AnchorView& anchor,
                               const RenderSettings& settings);

/// Adam update of the raw parameters. Throws NumericError on non-finite input.
void adam_update(VoxelRadianceField& field, const FieldGradients& grad, OptimizerState& state,
                 const SDSConfig& cfg);

/// One optimization step: draw, score-distillation gradient, optional anchor
/// gradient, Adam update. Deterministic in (cfg.seed, iteration, state).
TraceRecord sds_step(VoxelRadianceField& field, const ScoreBackend& backend, const DiffusionSchedule& schedule,
                     const PromptEmbedding& embedding, const DepthProvider& depth_provider, const SDSConfig& cfg,
                     OptimizerState& state, int iteration, const AnchorView* anchor = nullptr);

struct ReconstructionInputs {
  Image image;  // cropped object patch
  CameraPose input_pose;
  PointCloud cloud;
  PromptEmbedding embedding;
  const ScoreBackend* backend = nullptr;
  DiffusionSchedule schedule;
  /// Conditioning raster size; 0 means the render size.
  int depth_size = 0;
};

struct Reconstruction {
  VoxelRadianceField field;
  TrainTrace trace;
};

/// Called after every step with the current field and its record.
using StepCallback = std::function<void(const VoxelRadianceField&, const TraceRecord&)>;

/// Runs cfg.iterations steps from a constant field, anchoring every step to the input view.
Reconstruction reconstruct(const ReconstructionInputs& inputs, const SDSConfig& cfg,
                           const StepCallback& on_step = {});

/// Depth provider that projects the cloud per pose and memoizes by pose bucket.
DepthProvider memoized_depth_provider(PointCloud cloud, int render_size, int out_size);

}  // namespace voxlift
