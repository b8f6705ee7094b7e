#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace voxlift {

using Rgb = std::array<double, 3>;

inline constexpr Rgb kWhite{1.0, 1.0, 1.0};

/// Row-major H x W x 3 raster with channel values in [0,1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {0.0, 0.0, 0.0});
  Image(int width, int height, std::vector<double> pixels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  double& at(int x, int y, int c) { return pixels_[index(x, y, c)]; }
  double at(int x, int y, int c) const { return pixels_[index(x, y, c)]; }
  Rgb pixel(int x, int y) const;
  void set_pixel(int x, int y, const Rgb& value);

  std::span<double> data() noexcept { return pixels_; }
  std::span<const double> data() const noexcept { return pixels_; }

  /// Throws InvalidArgument if any channel is non-finite or outside [0,1].
  void validate() const;

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * 3 + c;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> pixels_;
};

/// Row-major H x W boolean mask.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  std::size_t count() const;

  bool operator==(const Mask&) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// Inclusive integer pixel bounds.
struct BBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const noexcept { return x1 - x0 + 1; }
  int height() const noexcept { return y1 - y0 + 1; }
  bool operator==(const BBox&) const = default;
};

struct PromptAnnotation {
  enum class Kind { Point, Box };

  Kind kind = Kind::Point;
  int x = 0;  // point
  int y = 0;
  BBox box;  // box

  static PromptAnnotation point(int x, int y) { return {Kind::Point, x, y, {}}; }
  static PromptAnnotation from_box(BBox b) { return {Kind::Box, 0, 0, b}; }

  /// Throws InvalidArgument when the prompt does not lie inside a width x height image.
  void validate(int width, int height) const;
};

double iou(const Mask& a, const Mask& b);

// PNG I/O. Channels map to [0,1] by v/255; saving rounds to nearest.
Image load_image(const std::filesystem::path& path);
Image decode_png(std::span<const std::uint8_t> bytes);
void save_image(const Image& image, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const Image& image);

Mask load_mask(const std::filesystem::path& path);
Mask decode_mask_png(std::span<const std::uint8_t> bytes);
void save_mask(const Mask& mask, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_mask_png(const Mask& mask);

double psnr(const Image& a, const Image& b);

}  // namespace voxlift
