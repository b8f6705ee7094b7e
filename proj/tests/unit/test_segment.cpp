#include <doctest.h>

#include "segment_fixtures.hpp"
#include "support.hpp"
#include "voxlift/error.hpp"
#include "voxlift/segment.hpp"

using namespace voxlift;

namespace {

// Tight box by scanning rows and columns for any set bit.
std::optional<BBox> scan_box(const Mask& m) {
  std::vector<bool> rows(m.height(), false), cols(m.width(), false);
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      if (m.at(x, y)) rows[y] = cols[x] = true;
  BBox b;
  int i = 0;
  while (i < m.width() && !cols[i]) ++i;
  if (i == m.width()) return std::nullopt;
  b.x0 = i;
  i = m.width() - 1;
  while (!cols[i]) --i;
  b.x1 = i;
  i = 0;
  while (!rows[i]) ++i;
  b.y0 = i;
  i = m.height() - 1;
  while (!rows[i]) --i;
  b.y1 = i;
  return b;
}

// Direct bilinear lookup at continuous pixel coordinates (pixel centres on integers).
double bilinear(const Image& img, const Mask& mask, double px, double py, int c, const Rgb& bg) {
  auto value = [&](int x, int y) {
    x = std::clamp(x, 0, img.width() - 1);
    y = std::clamp(y, 0, img.height() - 1);
    return mask.at(x, y) ? img.at(x, y, c) : bg[c];
  };
  const int xf = static_cast<int>(std::floor(px));
  const int yf = static_cast<int>(std::floor(py));
  const double ax = px - xf;
  const double ay = py - yf;
  return (1 - ax) * (1 - ay) * value(xf, yf) + ax * (1 - ay) * value(xf + 1, yf) +
         (1 - ax) * ay * value(xf, yf + 1) + ax * ay * value(xf + 1, yf + 1);
}

}  // namespace

TEST_SUITE("segment") {
  TEST_CASE("uniform image grows to the whole frame") {
    const Image img(9, 7, Rgb{0.5, 0.5, 0.5});
    for (auto [x, y] : {std::pair{0, 0}, std::pair{4, 3}, std::pair{8, 6}})
      CHECK(segment_region_grow(img, PromptAnnotation::point(x, y), 0.1).count() == 63);
  }

  TEST_CASE("two-region image yields the exact clicked half") {
    const int w = 16, h = 10;
    const Image img = testing::two_region(w, h);
    Mask truth(w, h);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w / 2; ++x) truth.set(x, y, true);
    const Mask m = segment_region_grow(img, PromptAnnotation::point(w / 4, h / 2), 0.1);
    CHECK(m == truth);
    CHECK(iou(m, truth) == 1.0);
  }

  TEST_CASE("noisy disk recovers the noiseless disk") {
    const auto [img, truth] = testing::noisy_disk();
    const Mask m = segment_region_grow(img, PromptAnnotation::point(32, 32), 0.15);
    CHECK(iou(m, truth) >= 0.95);
  }

  TEST_CASE("region contains the prompt and is idempotent for every seed inside it") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> level(0, 3);
    for (int trial = 0; trial < 20; ++trial) {
      // blocky image with few colour levels so regions have interesting shapes
      Image img(12, 12);
      for (int by = 0; by < 4; ++by)
        for (int bx = 0; bx < 4; ++bx) {
          const double v = level(rng) / 3.0;
          for (int y = 0; y < 3; ++y)
            for (int x = 0; x < 3; ++x) img.set_pixel(bx * 3 + x, by * 3 + y, {v, v, v});
        }
      const int sx = trial % 12, sy = (trial * 5) % 12;
      const Mask m = segment_region_grow(img, PromptAnnotation::point(sx, sy), 0.2);
      CHECK(m.at(sx, sy));
      for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x)
          if (m.at(x, y)) CHECK(segment_region_grow(img, PromptAnnotation::point(x, y), 0.2) == m);
    }
  }

  TEST_CASE("box prompt restricts the region to the box") {
    const Image img(10, 10, Rgb{0.3, 0.3, 0.3});
    const Mask m = segment_region_grow(img, PromptAnnotation::from_box({2, 3, 5, 7}), 0.1);
    CHECK(m.count() == 4 * 5);
    CHECK(mask_to_bbox(m, 0) == BBox{2, 3, 5, 7});
  }

  TEST_CASE("segment errors") {
    const Image img(4, 4);
    CHECK_THROWS_AS(segment_region_grow(img, PromptAnnotation::point(1, 1), 0.0), InvalidArgument);
    CHECK_THROWS_AS(segment_region_grow(img, PromptAnnotation::point(1, 1), -1.0), InvalidArgument);
    CHECK_THROWS_AS(segment_region_grow(img, PromptAnnotation::point(4, 1), 0.1), InvalidArgument);
    CHECK_THROWS_AS(segment_region_grow(img, PromptAnnotation::from_box({0, 0, 9, 1}), 0.1), InvalidArgument);
  }

  TEST_CASE("mask_to_bbox examples") {
    Mask one(8, 8);
    one.set(3, 4, true);
    CHECK(mask_to_bbox(one, 0) == BBox{3, 4, 3, 4});
    CHECK(mask_to_bbox(Mask(6, 5, true), 3) == BBox{0, 0, 5, 4});
    CHECK_THROWS_AS(mask_to_bbox(Mask(3, 3), 0), InvalidArgument);
  }

  TEST_CASE("mask_to_bbox of a disk is the clipped square around it") {
    const int n = 40;
    for (auto [cx, cy, r, m] : {std::tuple{20, 20, 6, 2}, std::tuple{3, 30, 5, 4}, std::tuple{35, 5, 7, 0}}) {
      Mask mask(n, n);
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          mask.set(x, y, (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r);
      const BBox expect{std::max(0, cx - r - m), std::max(0, cy - r - m), std::min(n - 1, cx + r + m),
                        std::min(n - 1, cy + r + m)};
      CHECK(mask_to_bbox(mask, m) == expect);
    }
  }

  TEST_CASE("mask_to_bbox matches an exhaustive scan on 1000 random masks") {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> dim(1, 24);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int checked = 0;
    while (checked < 1000) {
      const int w = dim(rng), h = dim(rng);
      const double density = u(rng) * 0.2;
      Mask m(w, h);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) m.set(x, y, u(rng) < density);
      const auto expect = scan_box(m);
      if (!expect) {
        CHECK_THROWS_AS(mask_to_bbox(m, 0), InvalidArgument);
        continue;
      }
      REQUIRE(mask_to_bbox(m, 0) == *expect);
      ++checked;
    }
  }

  TEST_CASE("square_box pads the shorter side and clips") {
    CHECK(square_box({2, 2, 5, 3}, 20, 20) == BBox{2, 1, 5, 4});
    CHECK(square_box({0, 0, 9, 2}, 10, 10) == BBox{0, 0, 9, 6});  // padded upward past 0, clipped
    CHECK(square_box({4, 4, 4, 4}, 8, 8) == BBox{4, 4, 4, 4});
  }

  TEST_CASE("identity crop is exact") {
    std::mt19937_64 rng(2);
    const Image img = testing::random_image(13, 13, rng);
    const Image out = apply_mask_crop(img, Mask(13, 13, true), {0, 0, 12, 12}, 13);
    CHECK(out == img);
  }

  TEST_CASE("empty mask crops to the background colour") {
    std::mt19937_64 rng(2);
    const Image img = testing::random_image(10, 6, rng);
    const Image out = apply_mask_crop(img, Mask(10, 6), {1, 1, 8, 4}, 5);
    CHECK(out == Image(5, 5, kWhite));
    const Rgb grey{0.2, 0.4, 0.6};
    CHECK(apply_mask_crop(img, Mask(10, 6), {1, 1, 8, 4}, 3, grey) == Image(3, 3, grey));
  }

  TEST_CASE("checkerboard crop of the left half matches a direct bilinear sampler") {
    Image board(8, 8);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const double v = (x + y) % 2 == 0 ? 1.0 : 0.0;
        board.set_pixel(x, y, {v, v * 0.5, 1.0 - v});
      }
    const Mask full(8, 8, true);
    const BBox left{0, 0, 3, 7};
    const Image out = apply_mask_crop(board, full, left, 8);
    for (int j = 0; j < 8; ++j) {
      for (int i = 0; i < 8; ++i) {
        // output pixel centre (i + 0.5) spans 4 source columns over 8 outputs
        const double px = std::clamp(left.x0 + (i + 0.5) * 4.0 / 8.0 - 0.5, 0.0, 7.0);
        const double py = std::clamp(left.y0 + (j + 0.5) * 8.0 / 8.0 - 0.5, 0.0, 7.0);
        for (int c = 0; c < 3; ++c) CHECK(out.at(i, j, c) == doctest::Approx(bilinear(board, full, px, py, c, kWhite)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("crop output stays in [0,1] and validates inputs") {
    std::mt19937_64 rng(9);
    std::bernoulli_distribution b(0.5);
    for (int trial = 0; trial < 20; ++trial) {
      const Image img = testing::random_image(9, 11, rng);
      Mask m(9, 11);
      for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 9; ++x) m.set(x, y, b(rng));
      const Image out = apply_mask_crop(img, m, {1, 2, 7, 9}, 17);
      CHECK_NOTHROW(out.validate());
    }
    const Image img(4, 4);
    CHECK_THROWS_AS(apply_mask_crop(img, Mask(4, 5), {0, 0, 3, 3}, 4), InvalidArgument);
    CHECK_THROWS_AS(apply_mask_crop(img, Mask(4, 4), {2, 0, 1, 3}, 4), InvalidArgument);
    CHECK_THROWS_AS(apply_mask_crop(img, Mask(4, 4), {0, 0, 3, 3}, 0), InvalidArgument);
  }
}
