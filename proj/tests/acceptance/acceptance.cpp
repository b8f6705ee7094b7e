// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <random>
#include <string>

#include "depth_oracle.hpp"
#include "inversion_oracle.hpp"
#include "render_oracles.hpp"
#include "segment_fixtures.hpp"
#include "support.hpp"
#include "voxlift/fixture.hpp"
#include "voxlift/pipeline.hpp"
#include "voxlift/segment.hpp"

using namespace voxlift;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome renderer_closed_form() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> sig(0.05, 5.0), col(0.0, 1.0), az(0, 2 * kPi), el(-1.3, 1.3), rad(1.9, 4.0);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const VoxelRadianceField f = init_field({8, 8, 8}, Aabb{}, sig(rng), {col(rng), col(rng), col(rng)});
    const FieldSample q = query(f, {0, 0, 0, 0, 0});
    const CameraPose pose = make_pose(az(rng), el(rng), rad(rng), deg2rad(60));
    RenderSettings s;
    s.samples_per_ray = 256;
    const int n = 24;
    const Image img = render(f, pose, n, n, s).image;
    const RayBundle rays = generate_rays(pose, n, n);
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        const Rgb want = testing::uniform_cube_pixel(f.bounds(), rays.origins[rays.index(x, y)],
                                                     rays.directions[rays.index(x, y)], q.density, q.color, kWhite);
        for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(img.at(x, y, c) - want[c]));
      }
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-3 && secs < 10.0, fmt("max |error| %.3g (< 1e-3), %.2f s (< 10 s)", worst, secs)};
}

Outcome gradient_finite_differences() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1002);
  const VoxelRadianceField f = testing::random_field({8, 8, 8}, rng, -1.5, 1.5);
  RenderSettings s;
  s.samples_per_ray = 64;
  s.jitter = true;
  s.seed = 7;
  std::uniform_real_distribution<double> up(-1, 1);
  std::vector<double> upstream(4 * 4 * 3);
  for (double& v : upstream) v = up(rng);
  const auto rep = testing::finite_difference_check(f, make_pose(0.9, 0.35, 2.3, deg2rad(45)), 4, 4, s, upstream,
                                                    1e-3, 1e-3, 1e-6);
  const double secs = seconds_since(t0);
  return {rep.failures == 0 && rep.touched > 0 && secs < 60.0,
          fmt("%zu touched parameters, %zu over tolerance, max |error| %.3g, worst relative above 1e-6 floor %.3g, "
              "%.2f s (< 60 s)",
              rep.touched, rep.failures, rep.worst_absolute, rep.worst_relative, secs)};
}

Outcome depth_projection() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<double> u(-1, 1), az(0, 2 * kPi), el(-1.3, 1.3), r(1.5, 4.0), fov(0.5, 1.6);
  std::size_t mismatched = 0;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    PointCloud cloud;
    for (int i = 0; i < 2000; ++i) cloud.points.push_back({{u(rng), u(rng), u(rng)}, {0.5, 0.5, 0.5}});
    const CameraPose pose = make_pose(az(rng), el(rng), r(rng), fov(rng));
    const SparseDepthMap got = project_depth(cloud, pose, 48, 40);
    const SparseDepthMap want = testing::zbuffer_oracle(cloud, pose.position, pose.fov_y, 48, 40);
    for (std::size_t i = 0; i < got.valid.size(); ++i) {
      if (got.valid[i] != want.valid[i]) {
        ++mismatched;
      } else if (got.valid[i]) {
        worst = std::max(worst, std::abs(got.depth[i] - want.depth[i]));
      }
    }
  }
  const double secs = seconds_since(t0);
  return {mismatched == 0 && worst <= 1e-6 && secs < 5.0,
          fmt("coverage mismatches %zu, max depth deviation %.3g (<= 1e-6), %.2f s (< 5 s)", mismatched, worst, secs)};
}

Outcome noising_statistics() {
  const DiffusionSchedule s = make_schedule();
  Rng rng(1004);
  constexpr int draws = 100000;
  std::string detail;
  bool pass = true;
  for (int t : {1, 100, 400, 700, 1000}) {
    const double ab = s.alpha_bar(t);
    const Raster x0(1, 1, 1, 0.3);
    double sum = 0.0, sum_sq = 0.0;
    std::vector<double> samples(draws);
    for (int i = 0; i < draws; ++i) samples[i] = add_noise(x0, t, gaussian_raster(1, 1, 1, rng), s).data[0];
    for (double v : samples) sum += v;
    const double mean = sum / draws;
    for (double v : samples) sum_sq += (v - mean) * (v - mean);
    const double var = sum_sq / (draws - 1);
    const double want = 1.0 - ab;
    const double se = want * std::sqrt(2.0 / (draws - 1));
    const double z = (var - want) / se;
    pass = pass && std::abs(z) <= 3.0;
    detail += fmt("t=%d z=%.2f ", t, z);
  }
  return {pass, detail + "(|z| <= 3)"};
}

Outcome textual_inversion() {
  const auto t0 = Clock::now();
  const DiffusionSchedule s = make_schedule();
  std::mt19937_64 rng(1005);
  double worst = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto inst = testing::make_linear_instance(rng, 8, 8, 6);
    const AnalyticOracle o = AnalyticOracle::linear(s, inst.matrix, inst.width, inst.height, inst.dim);
    Rng inv_rng(static_cast<std::uint64_t>(trial));
    const PromptEmbedding got =
        invert_embedding(inst.image, o, s, PromptEmbedding::zeros(static_cast<std::size_t>(inst.dim)), {}, inv_rng);
    worst = std::max(worst, testing::relative_error(got.values, testing::least_squares_embedding(inst)));
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-2 && secs < 30.0, fmt("worst relative error %.3g (< 1e-2), %.2f s (< 30 s)", worst, secs)};
}

double held_out_psnr(const VoxelRadianceField& field, const VoxelRadianceField& truth, const PipelineConfig& cfg) {
  double total = 0.0;
  const auto views = fixture::held_out_views();
  const RenderSettings s = fixture::evaluation_settings(cfg.sds.samples_per_ray);
  const int n = cfg.sds.render_size;
  for (const auto& v : views) {
    const CameraPose pose = make_pose(v.azimuth, v.elevation, cfg.sds.poses.radius, cfg.sds.poses.fov_y);
    const Image a = render(field, pose, n, n, s).image, b = render(truth, pose, n, n, s).image;
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data().size(); ++i) mse += (a.data()[i] - b.data()[i]) * (a.data()[i] - b.data()[i]);
    mse /= static_cast<double>(a.data().size());
    total += 10.0 * std::log10(1.0 / std::max(mse, 1e-20));
  }
  return total / static_cast<double>(views.size());
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome sds_end_to_end() {
  testing::TempDir dir("accept-sds");
  PipelineConfig cfg = load_pipeline_config(write_fixture(dir.path(), 160, 2000));
  const auto t0 = Clock::now();
  cfg.out_dir = dir / "a";
  const PipelineResult a = run_pipeline(cfg);
  const double secs = seconds_since(t0);
  const VoxelRadianceField truth = fixture::ground_truth_field(cfg.sds.resolution);
  const double psnr = held_out_psnr(a.field, truth, cfg);

  cfg.out_dir = dir / "b";
  run_pipeline(cfg);
  const bool same = file_bytes(dir / "a" / "field.vxrf") == file_bytes(dir / "b" / "field.vxrf");
  const auto& r = cfg.sds.resolution;
  return {psnr >= 22.0 && same && secs <= 600.0,
          fmt("%dx%dx%d grid, %dx%d renders, %d iterations, %zu training views: held-out PSNR %.2f dB (>= 22), "
              "rerun %s, %.0f s (<= 600 s)",
              r.nx, r.ny, r.nz, cfg.sds.render_size, cfg.sds.render_size, cfg.sds.iterations,
              cfg.sds.training_poses.size(), psnr, same ? "bitwise identical" : "DIFFERS", secs)};
}

Outcome segmentation_and_crop() {
  const Image two = testing::two_region(16, 10);
  Mask left(16, 10);
  for (int y = 0; y < 10; ++y)
    for (int x = 0; x < 8; ++x) left.set(x, y, true);
  const double iou_two = iou(segment_region_grow(two, PromptAnnotation::point(4, 5), 0.1), left);

  std::mt19937_64 rng(1007);
  const Image img = testing::random_image(17, 17, rng);
  const bool identity = apply_mask_crop(img, Mask(17, 17, true), {0, 0, 16, 16}, 17) == img;

  const auto [disk, truth] = testing::noisy_disk();
  const double iou_disk = iou(segment_region_grow(disk, PromptAnnotation::point(32, 32), 0.15), truth);
  return {iou_two == 1.0 && identity && iou_disk >= 0.95,
          fmt("two-region IoU %.4f (== 1), identity crop %s, noisy disk IoU %.4f (>= 0.95)", iou_two,
              identity ? "exact" : "NOT exact", iou_disk)};
}

Outcome pipeline_determinism() {
  testing::TempDir dir("accept-det");
  PipelineConfig cfg = load_pipeline_config(write_fixture(dir.path(), 160, 100));
  cfg.out_dir = dir / "a";
  run_pipeline(cfg);
  cfg.out_dir = dir / "b";
  run_pipeline(cfg);
  const std::string a = file_bytes(dir / "a" / "field.vxrf"), b = file_bytes(dir / "b" / "field.vxrf");
  return {!a.empty() && a == b, fmt("%d iterations at seed %llu, %zu-byte grids %s", cfg.sds.iterations,
                                    static_cast<unsigned long long>(cfg.sds.seed), a.size(),
                                    a == b ? "bitwise identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<Outcome()>> criteria[] = {
      {"renderer matches closed-form compositing", renderer_closed_form},
      {"render_backward matches central finite differences", gradient_finite_differences},
      {"project_depth matches brute-force z-buffer", depth_projection},
      {"forward noising variance", noising_statistics},
      {"textual inversion recovers least-squares embedding", textual_inversion},
      {"score distillation end to end", sds_end_to_end},
      {"segmentation and crop", segmentation_and_crop},
      {"pipeline determinism", pipeline_determinism},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
