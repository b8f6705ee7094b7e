#pragma once

#include <algorithm>
#include <random>
#include <utility>

#include "voxlift/image.hpp"

namespace testing {

/// Left half red, right half blue.
inline voxlift::Image two_region(int w, int h) {
  voxlift::Image img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) img.set_pixel(x, y, x < w / 2 ? voxlift::Rgb{1, 0, 0} : voxlift::Rgb{0, 0, 1});
  return img;
}

inline bool in_disk(int x, int y, double cx, double cy, double r) {
  const double dx = x + 0.5 - cx;
  const double dy = y + 0.5 - cy;
  return dx * dx + dy * dy <= r * r;
}

/// 64x64 disk (radius 20, centred) on a contrasting background with +-0.02
/// uniform noise per channel, and the noiseless disk mask. Prompt at (32, 32), tau 0.15.
inline std::pair<voxlift::Image, voxlift::Mask> noisy_disk() {
  const int n = 64;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> noise(-0.02, 0.02);
  voxlift::Image img(n, n);
  voxlift::Mask truth(n, n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      const bool inside = in_disk(x, y, 32, 32, 20);
      truth.set(x, y, inside);
      const voxlift::Rgb base = inside ? voxlift::Rgb{0.8, 0.3, 0.2} : voxlift::Rgb{0.2, 0.4, 0.7};
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(base[c] + noise(rng), 0.0, 1.0);
    }
  return {img, truth};
}

}  // namespace testing
