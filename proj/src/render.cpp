#include "voxlift/render.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include "voxlift/error.hpp"

namespace voxlift {

void RenderSettings::validate() const {
  if (samples_per_ray < 2) throw InvalidArgument("samples_per_ray must be >= 2");
  if (!(min_transmittance >= 0.0 && min_transmittance < 1.0))
    throw InvalidArgument("min_transmittance must lie in [0, 1)");
}

FieldGradients FieldGradients::zeros_like(const VoxelRadianceField& field) {
  return {std::vector<double>(field.density().size(), 0.0), std::vector<double>(field.color().size(), 0.0)};
}

void FieldGradients::add(const FieldGradients& other) {
  for (std::size_t i = 0; i < density.size(); ++i) density[i] += other.density[i];
  for (std::size_t i = 0; i < color.size(); ++i) color[i] += other.color[i];
}

void FieldGradients::scale(double s) {
  for (double& v : density) v *= s;
  for (double& v : color) v *= s;
}

bool FieldGradients::all_zero() const {
  auto zero = [](double v) { return v == 0.0; };
  return std::all_of(density.begin(), density.end(), zero) && std::all_of(color.begin(), color.end(), zero);
}

bool FieldGradients::all_finite() const {
  auto finite = [](double v) { return std::isfinite(v); };
  return std::all_of(density.begin(), density.end(), finite) && std::all_of(color.begin(), color.end(), finite);
}

void parallel_for_chunks(int count, const std::function<void(int)>& fn) {
  const int workers = std::min<int>(count, std::max(1u, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

namespace {

// Row bands processed independently. Fixed so that gradient summation order
// does not depend on the machine's thread count.
constexpr int kChunks = 4;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

std::uint64_t ray_key(const RenderSettings& s, std::size_t pixel) { return splitmix64(s.seed ^ splitmix64(pixel)); }

// Position of a sample inside its bin, in [0, 1).
double jitter_offset(const RenderSettings& s, std::uint64_t key, int sample) {
  if (!s.jitter) return 0.5;
  const std::uint64_t h = splitmix64(key + static_cast<std::uint64_t>(sample));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

struct Sample {
  TrilinearStencil stencil;
  double raw_density;
  double density;
  double density_grad;  // d density / d raw
  Rgb raw_color;
  Rgb color;
  double alpha;
  double transmittance;  // before this sample
};

struct RaySegment {
  bool hit = false;
  double t_near = 0.0;
  double delta = 0.0;
};

RaySegment clip(const VoxelRadianceField& field, const Vec3& o, const Vec3& d, int samples) {
  RaySegment seg;
  double t0 = 0.0;
  double t1 = 0.0;
  if (!intersect(field.bounds(), o, d, t0, t1) || !(t1 > t0)) return seg;
  seg.hit = true;
  seg.t_near = t0;
  seg.delta = (t1 - t0) / samples;
  return seg;
}

Sample evaluate(const VoxelRadianceField& field, const Vec3& p, double delta) {
  Sample s;
  s.stencil = trilinear_stencil(field, p);
  const auto density = field.density();
  const auto color = field.color();
  s.raw_density = 0.0;
  s.raw_color = {0.0, 0.0, 0.0};
  for (int k = 0; k < 8; ++k) {
    const double w = s.stencil.weight[k];
    const std::size_t i = s.stencil.index[k];
    s.raw_density += w * density[i];
    s.raw_color[0] += w * color[3 * i];
    s.raw_color[1] += w * color[3 * i + 1];
    s.raw_color[2] += w * color[3 * i + 2];
  }
  // softplus and its derivative share one exponential
  const double e = std::exp(-std::abs(s.raw_density));
  s.density = std::max(s.raw_density, 0.0) + std::log1p(e);
  s.density_grad = s.raw_density >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
  for (int c = 0; c < 3; ++c) s.color[c] = color_activation(s.raw_color[c]);
  s.alpha = -std::expm1(-s.density * delta);
  return s;
}

Rgb clamp_unit(const Rgb& c) {
  return {std::clamp(c[0], 0.0, 1.0), std::clamp(c[1], 0.0, 1.0), std::clamp(c[2], 0.0, 1.0)};
}

std::pair<int, int> band(int chunk, int height) {
  const int rows = (height + kChunks - 1) / kChunks;
  return {std::min(height, chunk * rows), std::min(height, (chunk + 1) * rows)};
}

}  // namespace

RenderResult render(const VoxelRadianceField& field, const CameraPose& pose, int width, int height,
                    const RenderSettings& settings) {
  settings.validate();
  const RayBundle rays = generate_rays(pose, width, height);
  RenderResult out{Image(width, height), std::vector<double>(static_cast<std::size_t>(width) * height, 1.0)};
  const int n = settings.samples_per_ray;

  parallel_for_chunks(kChunks, [&](int chunk) {
    const auto [row0, row1] = band(chunk, height);
    for (int y = row0; y < row1; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t pix = rays.index(x, y);
        const Vec3& o = rays.origins[pix];
        const Vec3& d = rays.directions[pix];
        const RaySegment seg = clip(field, o, d, n);
        const std::uint64_t key = ray_key(settings, pix);
        Rgb acc{0.0, 0.0, 0.0};
        double trans = 1.0;
        if (seg.hit) {
          for (int i = 0; i < n; ++i) {
            const double t = seg.t_near + (i + jitter_offset(settings, key, i)) * seg.delta;
            const Sample s = evaluate(field, o + d * t, seg.delta);
            const double w = trans * s.alpha;
            for (int c = 0; c < 3; ++c) acc[c] += w * s.color[c];
            trans *= 1.0 - s.alpha;
            if (trans < settings.min_transmittance) break;
          }
        }
        for (int c = 0; c < 3; ++c) acc[c] += trans * settings.background[c];
        out.image.set_pixel(x, y, clamp_unit(acc));
        out.transmittance[pix] = trans;
      }
    }
  });
  return out;
}

namespace {

// Shared reverse sweep. upstream_at(pixel, colour) yields dLoss/dpixel given the
// ray's forward colour, so photometric losses need only one forward pass.
template <typename UpstreamFn>
FieldGradients backward_impl(const VoxelRadianceField& field, const CameraPose& pose, int width, int height,
                             const RenderSettings& settings, const UpstreamFn& upstream_at) {
  settings.validate();
  const RayBundle rays = generate_rays(pose, width, height);
  const int n = settings.samples_per_ray;

  std::vector<FieldGradients> partial(kChunks);
  parallel_for_chunks(kChunks, [&](int chunk) {
    FieldGradients& grad = partial[static_cast<std::size_t>(chunk)];
    grad = FieldGradients::zeros_like(field);
    std::vector<Sample> samples(static_cast<std::size_t>(n));
    const auto [row0, row1] = band(chunk, height);
    for (int y = row0; y < row1; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::size_t pix = rays.index(x, y);
        const Vec3& o = rays.origins[pix];
        const Vec3& d = rays.directions[pix];
        if (!upstream_at.needs_color() && !upstream_at.nonzero(pix)) continue;
        const RaySegment seg = clip(field, o, d, n);
        const std::uint64_t key = ray_key(settings, pix);

        double trans = 1.0;
        Rgb acc{0.0, 0.0, 0.0};
        int evaluated = 0;
        if (seg.hit) {
          for (int i = 0; i < n; ++i) {
            const double t = seg.t_near + (i + jitter_offset(settings, key, i)) * seg.delta;
            Sample& s = samples[static_cast<std::size_t>(i)];
            s = evaluate(field, o + d * t, seg.delta);
            s.transmittance = trans;
            for (int c = 0; c < 3; ++c) acc[c] += trans * s.alpha * s.color[c];
            trans *= 1.0 - s.alpha;
            evaluated = i + 1;
            if (trans < settings.min_transmittance) break;
          }
        }
        for (int c = 0; c < 3; ++c) acc[c] += trans * settings.background[c];
        const std::array<double, 3> g = upstream_at(pix, clamp_unit(acc));
        if (!seg.hit || (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0)) continue;

        // suffix = light composited behind the current sample
        double suffix[3];
        for (int c = 0; c < 3; ++c) suffix[c] = trans * settings.background[c];
        for (int i = evaluated - 1; i >= 0; --i) {
          const Sample& s = samples[static_cast<std::size_t>(i)];
          const double weight = s.transmittance * s.alpha;
          const double t_after = s.transmittance * (1.0 - s.alpha);

          double d_sigma = 0.0;
          for (int c = 0; c < 3; ++c) d_sigma += g[c] * (t_after * s.color[c] - suffix[c]);
          d_sigma *= seg.delta;
          const double d_raw_density = d_sigma * s.density_grad;

          double d_raw_color[3];
          for (int c = 0; c < 3; ++c) {
            const bool pass = s.raw_color[c] >= 0.0 && s.raw_color[c] <= 1.0;
            d_raw_color[c] = pass ? g[c] * weight : 0.0;
          }
          for (int k = 0; k < 8; ++k) {
            const double w = s.stencil.weight[k];
            const std::size_t idx = s.stencil.index[k];
            grad.density[idx] += w * d_raw_density;
            grad.color[3 * idx] += w * d_raw_color[0];
            grad.color[3 * idx + 1] += w * d_raw_color[1];
            grad.color[3 * idx + 2] += w * d_raw_color[2];
          }
          for (int c = 0; c < 3; ++c) suffix[c] += weight * s.color[c];
        }
      }
    }
  });

  FieldGradients total = std::move(partial[0]);
  for (int c = 1; c < kChunks; ++c) total.add(partial[static_cast<std::size_t>(c)]);
  return total;
}

struct BufferUpstream {
  std::span<const double> upstream;
  bool needs_color() const { return false; }
  bool nonzero(std::size_t pix) const {
    return upstream[3 * pix] != 0.0 || upstream[3 * pix + 1] != 0.0 || upstream[3 * pix + 2] != 0.0;
  }
  std::array<double, 3> operator()(std::size_t pix, const Rgb&) const {
    return {upstream[3 * pix], upstream[3 * pix + 1], upstream[3 * pix + 2]};
  }
};

struct PhotometricUpstream {
  const Image& target;
  double weight;
  std::vector<double>* residuals;
  bool needs_color() const { return true; }
  bool nonzero(std::size_t) const { return true; }
  std::array<double, 3> operator()(std::size_t pix, const Rgb& color) const {
    std::array<double, 3> g{};
    for (int c = 0; c < 3; ++c) {
      const double r = color[c] - target.data()[3 * pix + c];
      (*residuals)[3 * pix + c] = r;
      g[c] = 2.0 * weight * r;
    }
    return g;
  }
};

}  // namespace

FieldGradients render_backward(const VoxelRadianceField& field, const CameraPose& pose, int width, int height,
                               const RenderSettings& settings, std::span<const double> upstream) {
  if (upstream.size() != static_cast<std::size_t>(width) * height * 3)
    throw InvalidArgument("render_backward: upstream gradient does not match render dimensions");
  return backward_impl(field, pose, width, height, settings, BufferUpstream{upstream});
}

PhotometricGradient photometric_gradient(const VoxelRadianceField& field, const CameraPose& pose,
                                         const Image& target, double weight, const RenderSettings& settings) {
  PhotometricGradient out;
  std::vector<double> residuals(target.data().size(), 0.0);
  out.grad = backward_impl(field, pose, target.width(), target.height(), settings,
                           PhotometricUpstream{target, weight, &residuals});
  double sq = 0.0;
  for (double r : residuals) sq += r * r;
  out.loss = weight * sq;
  return out;
}

}  // namespace voxlift
