#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>

#include "voxlift/camera.hpp"
#include "voxlift/field.hpp"
#include "voxlift/image.hpp"
#include "voxlift/pipeline.hpp"

namespace testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("voxlift-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline voxlift::Image random_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  voxlift::Image img(w, h);
  for (double& v : img.data()) v = u(rng);
  return img;
}

/// Field with raw parameters drawn uniformly from the given ranges.
inline voxlift::VoxelRadianceField random_field(voxlift::GridResolution res, std::mt19937_64& rng,
                                                double density_lo, double density_hi, double color_lo = 0.05,
                                                double color_hi = 0.95) {
  voxlift::VoxelRadianceField f(res, voxlift::Aabb{});
  std::uniform_real_distribution<double> d(density_lo, density_hi);
  std::uniform_real_distribution<double> c(color_lo, color_hi);
  for (float& v : f.density()) v = static_cast<float>(d(rng));
  for (float& v : f.color()) v = static_cast<float>(c(rng));
  return f;
}

/// Bundled fixture scaled down so a full pipeline run takes well under a second.
inline voxlift::PipelineConfig small_pipeline(const std::filesystem::path& dir, int iterations = 4) {
  voxlift::PipelineConfig cfg = voxlift::load_pipeline_config(voxlift::write_fixture(dir, 48, iterations));
  cfg.sds.resolution = {12, 12, 12};
  cfg.sds.render_size = 16;
  cfg.sds.samples_per_ray = 16;
  cfg.view_size = 16;
  return cfg;
}

}  // namespace testing
