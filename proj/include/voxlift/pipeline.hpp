#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "voxlift/image.hpp"
#include "voxlift/sds.hpp"

namespace voxlift {

enum class BackendKind { Analytic, Remote };

struct PipelineConfig {
  std::filesystem::path image;
  std::optional<PromptAnnotation> prompt;
  BackendKind backend = BackendKind::Analytic;
  std::string remote_url;
  /// Use the bridge's /v1/segment instead of the local region grower.
  bool remote_segment = false;
  double segment_tau = 0.5;
  int crop_margin = 4;
  /// Pose of the input photograph (radians); the crop is rendered through the
  /// matching sensor window of this camera.
  double input_azimuth = 0.0;
  double input_elevation = 0.0;
  SDSConfig sds;
  int embedding_dim = 16;
  int inversion_steps = 200;
  double inversion_lr = 0.05;
  /// Ground-truth object (VXRF) for the analytic oracle and the local point
  /// cloud fallback. Empty selects the bundled synthetic object in analytic mode.
  std::filesystem::path ground_truth;
  /// Optional PLY used instead of /v1/pointcloud.
  std::filesystem::path point_cloud;
  int view_count = 5;
  int view_size = 128;
  double view_elevation = 0.0;  // radians
  std::filesystem::path out_dir;

  /// Throws InvalidArgument on any inconsistency, IoError on missing inputs.
  void validate() const;
};

/// Default SDS settings for the pipeline (bucketed training views of the bundled fixture).
PipelineConfig default_pipeline_config();

// Flat `key = value` configuration text ('#' comments, optional double quotes
// around values). Keys mirror the CLI flags.
std::map<std::string, std::string> parse_config_text(std::string_view text);
/// Applies one setting; throws InvalidArgument for unknown keys or bad values.
void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value);
PipelineConfig load_pipeline_config(const std::filesystem::path& path, PipelineConfig base = default_pipeline_config());
/// Every setting, in a form load_pipeline_config reads back to an equal config.
std::string to_config_text(const PipelineConfig& cfg);

struct PipelineObserver {
  std::function<void(const std::string& stage)> on_stage;
  StepCallback on_step;
};

struct PipelineResult {
  VoxelRadianceField field;
  TrainTrace trace;
  BBox crop_box;
  std::optional<std::string> caption;
  /// Mean PSNR over the held-out views when a ground-truth object is known.
  std::optional<double> held_out_psnr;
  std::filesystem::path out_dir;
};

/// segment -> crop -> caption/invert -> point cloud -> depth -> SDS -> export.
/// Stage failures are raised as StageError. Nothing is written before every
/// stage has succeeded.
PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineObserver& observer = {});

/// Writes the bundled synthetic object's input view and a matching config into `dir`.
/// Returns the config path.
std::filesystem::path write_fixture(const std::filesystem::path& dir, int image_size = 160, int iterations = 2000);

}  // namespace voxlift
