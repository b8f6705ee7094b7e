#pragma once

#include <map>
#include <optional>
#include <span>
#include <vector>

#include "voxlift/camera.hpp"
#include "voxlift/image.hpp"

namespace voxlift {

/// Unconstrained row-major H x W x C raster (noisy images, noise draws, predictions).
struct Raster {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;

  Raster() = default;
  Raster(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  static Raster from_image(const Image& image);
  bool same_shape(const Raster& o) const { return width == o.width && height == o.height && channels == o.channels; }
  std::size_t size() const { return data.size(); }
  bool operator==(const Raster&) const = default;
};

/// Standard-normal raster drawn from `rng`.
Raster gaussian_raster(int width, int height, int channels, Rng& rng);

/// Cumulative noise coefficients alpha_bar_t for t = 1..T.
class DiffusionSchedule {
 public:
  DiffusionSchedule() = default;
  /// Requires values in (0, 1], strictly decreasing.
  explicit DiffusionSchedule(std::vector<double> alpha_bar);

  int steps() const noexcept { return static_cast<int>(alpha_bar_.size()); }
  /// 1-based.
  double alpha_bar(int t) const;
  std::span<const double> values() const noexcept { return alpha_bar_; }

 private:
  std::vector<double> alpha_bar_;
};

/// Linear beta from beta_min to beta_max over T steps; alpha_bar_t = prod_{s<=t} (1 - beta_s).
DiffusionSchedule make_schedule(int steps = 1000, double beta_min = 1e-4, double beta_max = 2e-2);

/// x_t = sqrt(alpha_bar_t) * image + sqrt(1 - alpha_bar_t) * eps.
Raster add_noise(const Raster& image, int t, const Raster& eps, const DiffusionSchedule& schedule);

/// Desk-scale depth conditioning: validity-weighted average pooling of a sparse
/// depth map onto a size x size grid, min-max normalized over valid cells.
/// Channel 0 is normalized depth, channel 1 validity (0 or 1).
struct DepthConditioning {
  int size = 0;
  std::vector<double> depth;
  std::vector<double> validity;

  Raster as_raster() const;
};

DepthConditioning encode_depth(const SparseDepthMap& depth, int out_size);

struct PromptEmbedding {
  std::vector<double> values;

  static PromptEmbedding zeros(std::size_t dim) { return {std::vector<double>(dim, 0.0)}; }
  bool operator==(const PromptEmbedding&) const = default;
};

/// Everything a noise predictor may condition on.
struct ScoreQuery {
  const Raster& noisy;
  int t;
  const DepthConditioning* depth = nullptr;
  const PromptEmbedding& embedding;
  /// Pose the noisy image was rendered from; keys per-view oracle targets.
  const CameraPose* pose = nullptr;
  /// When set, the backend also returns d/d(embedding) of mean((eps_hat - target_noise)^2).
  const Raster* target_noise = nullptr;
};

struct ScorePrediction {
  Raster eps;
  std::optional<std::vector<double>> embedding_grad;
};

/// eps_phi(x_t, depth conditioning, embedding). Implementations are immutable
/// after construction and safe to call concurrently.
class ScoreBackend {
 public:
  virtual ~ScoreBackend() = default;
  virtual ScorePrediction predict(const ScoreQuery& query) const = 0;
  /// Whether predictions depend on the embedding at all.
  virtual bool embedding_sensitive() const = 0;
};

/// Quantized (azimuth, elevation) in tenths of a degree, azimuth wrapped to [0, 3600).
struct PoseKey {
  int azimuth = 0;
  int elevation = 0;

  static PoseKey from_pose(const CameraPose& pose);
  static PoseKey from_degrees(double azimuth_deg, double elevation_deg);
  auto operator<=>(const PoseKey&) const = default;
};

/// Closed-form noise predictor. With target y the prediction is
///   eps_hat = (x_t - sqrt(abar_t) y) / sqrt(1 - abar_t),
/// so eps_hat - eps = sqrt(abar_t) / sqrt(1 - abar_t) * (x - y) and score
/// distillation becomes a scaled L2 pull toward y.
///
/// Per-pose mode keys y by pose bucket. Linear mode sets y = A e broadcast to
/// all three channels, where A maps the embedding to per-pixel intensities.
class AnalyticOracle final : public ScoreBackend {
 public:
  static AnalyticOracle per_pose(DiffusionSchedule schedule, std::map<PoseKey, Image> targets);
  /// `matrix` is row-major (width * height) x dim.
  static AnalyticOracle linear(DiffusionSchedule schedule, std::vector<double> matrix, int width, int height,
                               int dim);

  ScorePrediction predict(const ScoreQuery& query) const override;
  bool embedding_sensitive() const override { return mode_ == Mode::Linear; }

  /// Target image y for a query (per-pose bucket or A e).
  Raster target_for(const ScoreQuery& query) const;
  const DiffusionSchedule& schedule() const { return schedule_; }

 private:
  enum class Mode { PerPose, Linear };
  AnalyticOracle() = default;

  Mode mode_ = Mode::PerPose;
  DiffusionSchedule schedule_;
  std::map<PoseKey, Image> targets_;
  std::vector<double> matrix_;
  int width_ = 0;
  int height_ = 0;
  int dim_ = 0;
};

struct InversionOptions {
  int steps = 1000;
  double lr = 0.05;
  double t_min_fraction = 0.02;
  double t_max_fraction = 0.98;
  /// Forward-difference probe size when the backend returns no gradient.
  double probe_step = 1e-3;
};

/// Textual-inversion style estimate of the embedding: minimizes
/// ||eps_phi(I_t, e) - eps||^2 over e, resampling (t, eps) each step.
/// Adam with cosine-decayed step size; returns the final iterate.
PromptEmbedding invert_embedding(const Image& image, const ScoreBackend& backend, const DiffusionSchedule& schedule,
                                 const PromptEmbedding& init, const InversionOptions& options, Rng& rng);

/// Uniform integer step in [max(1, ceil(lo * T)), max(1, floor(hi * T))].
int sample_timestep(const DiffusionSchedule& schedule, double lo_fraction, double hi_fraction, Rng& rng);

}  // namespace voxlift
