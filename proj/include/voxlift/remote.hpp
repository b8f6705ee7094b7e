#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "voxlift/camera.hpp"
#include "voxlift/diffusion.hpp"
#include "voxlift/image.hpp"

namespace voxlift {

struct SegmentResult {
  Mask mask;
  BBox bbox;
};

/// Client for the model-bridge sidecar (/v1/segment, /v1/caption,
/// /v1/pointcloud, /v1/score). Each call opens its own connection, so
/// concurrent requests are allowed.
class RemoteClient final : public ScoreBackend {
 public:
  /// `base_url` like "http://127.0.0.1:8765".
  explicit RemoteClient(std::string base_url, std::chrono::milliseconds timeout = std::chrono::seconds(60));

  SegmentResult segment(const Image& image, const PromptAnnotation& prompt) const;
  std::string caption(const Image& image) const;
  PointCloud pointcloud(const Image& image) const;

  ScorePrediction predict(const ScoreQuery& query) const override;
  /// Assumed true; invert_embedding's forward-difference probes detect a bridge
  /// that ignores the embedding.
  bool embedding_sensitive() const override { return true; }

  const std::string& base_url() const { return base_url_; }

 private:
  std::string post(const std::string& path, const std::string& body) const;

  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

}  // namespace voxlift
