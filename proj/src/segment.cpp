#include "voxlift/segment.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <utility>

#include "voxlift/error.hpp"

namespace voxlift {

namespace {

double color_distance(const Image& img, int x0, int y0, int x1, int y1) {
  double s = 0.0;
  for (int c = 0; c < 3; ++c) {
    const double d = img.at(x0, y0, c) - img.at(x1, y1, c);
    s += d * d;
  }
  return std::sqrt(s);
}

Mask flood(const Image& image, int seed_x, int seed_y, const BBox& region, double tau) {
  Mask mask(image.width(), image.height());
  std::queue<std::pair<int, int>> frontier;
  mask.set(seed_x, seed_y, true);
  frontier.emplace(seed_x, seed_y);
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  while (!frontier.empty()) {
    const auto [x, y] = frontier.front();
    frontier.pop();
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k];
      const int ny = y + dy[k];
      if (nx < region.x0 || ny < region.y0 || nx > region.x1 || ny > region.y1) continue;
      if (mask.at(nx, ny)) continue;
      if (color_distance(image, x, y, nx, ny) > tau) continue;
      mask.set(nx, ny, true);
      frontier.emplace(nx, ny);
    }
  }
  return mask;
}

}  // namespace

Mask segment_region_grow(const Image& image, const PromptAnnotation& prompt, double tau) {
  if (!(tau > 0.0)) throw InvalidArgument("segment_region_grow: tau must be positive");
  prompt.validate(image.width(), image.height());
  if (prompt.kind == PromptAnnotation::Kind::Point) {
    const BBox whole{0, 0, image.width() - 1, image.height() - 1};
    return flood(image, prompt.x, prompt.y, whole, tau);
  }
  const BBox& b = prompt.box;
  return flood(image, (b.x0 + b.x1) / 2, (b.y0 + b.y1) / 2, b, tau);
}

BBox mask_to_bbox(const Mask& mask, int margin) {
  if (margin < 0) throw InvalidArgument("mask_to_bbox: negative margin");
  BBox b{mask.width(), mask.height(), -1, -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      b.x0 = std::min(b.x0, x);
      b.y0 = std::min(b.y0, y);
      b.x1 = std::max(b.x1, x);
      b.y1 = std::max(b.y1, y);
    }
  }
  if (b.x1 < 0) throw InvalidArgument("mask_to_bbox: empty mask");
  b.x0 = std::max(0, b.x0 - margin);
  b.y0 = std::max(0, b.y0 - margin);
  b.x1 = std::min(mask.width() - 1, b.x1 + margin);
  b.y1 = std::min(mask.height() - 1, b.y1 + margin);
  return b;
}

BBox square_box(const BBox& box, int width, int height) {
  BBox b = box;
  const int w = b.width();
  const int h = b.height();
  if (w < h) {
    const int pad = h - w;
    b.x0 -= pad / 2;
    b.x1 += pad - pad / 2;
  } else if (h < w) {
    const int pad = w - h;
    b.y0 -= pad / 2;
    b.y1 += pad - pad / 2;
  }
  b.x0 = std::max(0, b.x0);
  b.y0 = std::max(0, b.y0);
  b.x1 = std::min(width - 1, b.x1);
  b.y1 = std::min(height - 1, b.y1);
  return b;
}

Image apply_mask_crop(const Image& image, const Mask& mask, const BBox& box, int out_size,
                      const Rgb& background) {
  if (mask.width() != image.width() || mask.height() != image.height())
    throw InvalidArgument("apply_mask_crop: mask and image dimensions differ");
  if (box.x0 > box.x1 || box.y0 > box.y1) throw InvalidArgument("apply_mask_crop: degenerate box");
  if (box.x0 < 0 || box.y0 < 0 || box.x1 >= image.width() || box.y1 >= image.height())
    throw InvalidArgument("apply_mask_crop: box outside image");
  if (out_size < 1) throw InvalidArgument("apply_mask_crop: out_size must be >= 1");

  auto masked = [&](int x, int y, int c) { return mask.at(x, y) ? image.at(x, y, c) : background[c]; };

  const double sx = static_cast<double>(box.width()) / out_size;
  const double sy = static_cast<double>(box.height()) / out_size;
  Image out(out_size, out_size);
  for (int j = 0; j < out_size; ++j) {
    const double py = std::clamp(box.y0 + (j + 0.5) * sy - 0.5, 0.0, image.height() - 1.0);
    const int y0 = std::min(static_cast<int>(py), image.height() - 1);
    const int y1 = std::min(y0 + 1, image.height() - 1);
    const double fy = py - y0;
    for (int i = 0; i < out_size; ++i) {
      const double px = std::clamp(box.x0 + (i + 0.5) * sx - 0.5, 0.0, image.width() - 1.0);
      const int x0 = std::min(static_cast<int>(px), image.width() - 1);
      const int x1 = std::min(x0 + 1, image.width() - 1);
      const double fx = px - x0;
      for (int c = 0; c < 3; ++c) {
        const double top = masked(x0, y0, c) * (1.0 - fx) + masked(x1, y0, c) * fx;
        const double bottom = masked(x0, y1, c) * (1.0 - fx) + masked(x1, y1, c) * fx;
        out.at(i, j, c) = top * (1.0 - fy) + bottom * fy;
      }
    }
  }
  return out;
}

}  // namespace voxlift
