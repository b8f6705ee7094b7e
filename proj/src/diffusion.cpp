#include "voxlift/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "voxlift/error.hpp"

namespace voxlift {

Raster Raster::from_image(const Image& image) {
  Raster r(image.width(), image.height(), 3);
  std::copy(image.data().begin(), image.data().end(), r.data.begin());
  return r;
}

Raster gaussian_raster(int width, int height, int channels, Rng& rng) {
  Raster r(width, height, channels);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : r.data) v = n(rng);
  return r;
}

DiffusionSchedule::DiffusionSchedule(std::vector<double> alpha_bar) : alpha_bar_(std::move(alpha_bar)) {
  if (alpha_bar_.empty()) throw InvalidArgument("schedule must have at least one step");
  for (std::size_t i = 0; i < alpha_bar_.size(); ++i) {
    const double a = alpha_bar_[i];
    if (!(a > 0.0 && a <= 1.0)) throw InvalidArgument("alpha_bar must lie in (0, 1]");
    if (i > 0 && !(a < alpha_bar_[i - 1])) throw InvalidArgument("alpha_bar must be strictly decreasing");
  }
}

double DiffusionSchedule::alpha_bar(int t) const {
  if (t < 1 || t > steps()) throw InvalidArgument("timestep " + std::to_string(t) + " outside schedule");
  return alpha_bar_[static_cast<std::size_t>(t - 1)];
}

DiffusionSchedule make_schedule(int steps, double beta_min, double beta_max) {
  if (steps < 1) throw InvalidArgument("make_schedule: T must be >= 1");
  if (!(beta_min > 0.0 && beta_min <= beta_max && beta_max < 1.0))
    throw InvalidArgument("make_schedule: require 0 < beta_min <= beta_max < 1");
  std::vector<double> alpha_bar(static_cast<std::size_t>(steps));
  double prod = 1.0;
  for (int s = 0; s < steps; ++s) {
    const double beta = steps == 1 ? beta_min : beta_min + (beta_max - beta_min) * s / (steps - 1);
    prod *= 1.0 - beta;
    alpha_bar[static_cast<std::size_t>(s)] = prod;
  }
  return DiffusionSchedule(std::move(alpha_bar));
}

Raster add_noise(const Raster& image, int t, const Raster& eps, const DiffusionSchedule& schedule) {
  if (!image.same_shape(eps)) throw InvalidArgument("add_noise: noise shape differs from image shape");
  const double ab = schedule.alpha_bar(t);
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);
  Raster out = image;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = signal * image.data[i] + noise * eps.data[i];
  return out;
}

Raster DepthConditioning::as_raster() const {
  Raster r(size, size, 2);
  for (std::size_t i = 0; i < depth.size(); ++i) {
    r.data[2 * i] = depth[i];
    r.data[2 * i + 1] = validity[i];
  }
  return r;
}

DepthConditioning encode_depth(const SparseDepthMap& map, int out_size) {
  if (out_size < 1) throw InvalidArgument("encode_depth: out_size must be >= 1");
  const auto cells = static_cast<std::size_t>(out_size) * out_size;
  std::vector<double> sum(cells, 0.0);
  std::vector<int> count(cells, 0);
  for (int y = 0; y < map.height; ++y) {
    const int cy = static_cast<int>(static_cast<long long>(y) * out_size / map.height);
    for (int x = 0; x < map.width; ++x) {
      const auto i = map.index(x, y);
      if (!map.valid[i]) continue;
      const int cx = static_cast<int>(static_cast<long long>(x) * out_size / map.width);
      const auto c = static_cast<std::size_t>(cy) * out_size + cx;
      sum[c] += map.depth[i];
      ++count[c];
    }
  }

  DepthConditioning out;
  out.size = out_size;
  out.depth.assign(cells, 0.0);
  out.validity.assign(cells, 0.0);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t c = 0; c < cells; ++c) {
    if (count[c] == 0) continue;
    out.depth[c] = sum[c] / count[c];
    out.validity[c] = 1.0;
    lo = std::min(lo, out.depth[c]);
    hi = std::max(hi, out.depth[c]);
  }
  for (std::size_t c = 0; c < cells; ++c) {
    if (out.validity[c] == 0.0) continue;
    out.depth[c] = hi > lo ? (out.depth[c] - lo) / (hi - lo) : 0.0;
  }
  return out;
}

PoseKey PoseKey::from_degrees(double azimuth_deg, double elevation_deg) {
  long az = std::lround(azimuth_deg * 10.0) % 3600;
  if (az < 0) az += 3600;
  return {static_cast<int>(az), static_cast<int>(std::lround(elevation_deg * 10.0))};
}

PoseKey PoseKey::from_pose(const CameraPose& pose) {
  return from_degrees(rad2deg(pose_azimuth(pose)), rad2deg(pose_elevation(pose)));
}

AnalyticOracle AnalyticOracle::per_pose(DiffusionSchedule schedule, std::map<PoseKey, Image> targets) {
  if (targets.empty()) throw InvalidArgument("oracle needs at least one pose target");
  for (const auto& [key, img] : targets) img.validate();
  AnalyticOracle o;
  o.mode_ = Mode::PerPose;
  o.schedule_ = std::move(schedule);
  o.targets_ = std::move(targets);
  return o;
}

AnalyticOracle AnalyticOracle::linear(DiffusionSchedule schedule, std::vector<double> matrix, int width, int height,
                                      int dim) {
  if (width < 1 || height < 1 || dim < 1) throw InvalidArgument("oracle: invalid linear map shape");
  if (matrix.size() != static_cast<std::size_t>(width) * height * dim)
    throw InvalidArgument("oracle: matrix size must be (width * height) x dim");
  AnalyticOracle o;
  o.mode_ = Mode::Linear;
  o.schedule_ = std::move(schedule);
  o.matrix_ = std::move(matrix);
  o.width_ = width;
  o.height_ = height;
  o.dim_ = dim;
  return o;
}

Raster AnalyticOracle::target_for(const ScoreQuery& q) const {
  if (mode_ == Mode::PerPose) {
    if (q.pose == nullptr) throw InvalidArgument("oracle: per-pose mode needs the query pose");
    const PoseKey key = PoseKey::from_pose(*q.pose);
    auto it = targets_.find(key);
    if (it == targets_.end())
      throw InvalidArgument("oracle: unknown pose bucket (az " + std::to_string(key.azimuth / 10.0) + ", el " +
                            std::to_string(key.elevation / 10.0) + ")");
    return Raster::from_image(it->second);
  }
  if (static_cast<int>(q.embedding.values.size()) != dim_)
    throw InvalidArgument("oracle: embedding dimension mismatch");
  Raster y(width_, height_, 3);
  const auto pixels = static_cast<std::size_t>(width_) * height_;
  for (std::size_t p = 0; p < pixels; ++p) {
    double v = 0.0;
    for (int j = 0; j < dim_; ++j) v += matrix_[p * dim_ + j] * q.embedding.values[static_cast<std::size_t>(j)];
    y.data[3 * p] = y.data[3 * p + 1] = y.data[3 * p + 2] = v;
  }
  return y;
}

ScorePrediction AnalyticOracle::predict(const ScoreQuery& q) const {
  const Raster y = target_for(q);
  if (!q.noisy.same_shape(y)) throw InvalidArgument("oracle: noisy image shape differs from target shape");
  const double ab = schedule_.alpha_bar(q.t);
  if (!(ab < 1.0)) throw InvalidArgument("oracle: alpha_bar_t must be < 1");
  const double signal = std::sqrt(ab);
  const double noise = std::sqrt(1.0 - ab);

  ScorePrediction out{Raster(y.width, y.height, 3), std::nullopt};
  for (std::size_t i = 0; i < y.data.size(); ++i) out.eps.data[i] = (q.noisy.data[i] - signal * y.data[i]) / noise;

  if (q.target_noise != nullptr && mode_ == Mode::Linear) {
    if (!q.target_noise->same_shape(out.eps)) throw InvalidArgument("oracle: target noise shape mismatch");
    // d/dy of mean((eps_hat - eps)^2) is -2 sqrt(ab) / (N sqrt(1 - ab)) * residual; chain through y = A e.
    const double scale = -2.0 * signal / (noise * static_cast<double>(out.eps.size()));
    std::vector<double> grad(static_cast<std::size_t>(dim_), 0.0);
    const auto pixels = static_cast<std::size_t>(width_) * height_;
    for (std::size_t p = 0; p < pixels; ++p) {
      double r = 0.0;
      for (int c = 0; c < 3; ++c) r += out.eps.data[3 * p + c] - q.target_noise->data[3 * p + c];
      for (int j = 0; j < dim_; ++j) grad[static_cast<std::size_t>(j)] += scale * matrix_[p * dim_ + j] * r;
    }
    out.embedding_grad = std::move(grad);
  }
  return out;
}

int sample_timestep(const DiffusionSchedule& schedule, double lo_fraction, double hi_fraction, Rng& rng) {
  if (!(lo_fraction > 0.0 && lo_fraction <= hi_fraction && hi_fraction <= 1.0))
    throw InvalidArgument("timestep range must satisfy 0 < lo <= hi <= 1");
  const int steps = schedule.steps();
  const int lo = std::max(1, static_cast<int>(std::ceil(lo_fraction * steps)));
  const int hi = std::max(lo, static_cast<int>(std::floor(hi_fraction * steps)));
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

namespace {

double mean_squared_residual(const Raster& prediction, const Raster& noise) {
  double s = 0.0;
  for (std::size_t i = 0; i < noise.data.size(); ++i) {
    const double r = prediction.data[i] - noise.data[i];
    s += r * r;
  }
  return s / static_cast<double>(noise.data.size());
}

}  // namespace

PromptEmbedding invert_embedding(const Image& image, const ScoreBackend& backend, const DiffusionSchedule& schedule,
                                 const PromptEmbedding& init, const InversionOptions& options, Rng& rng) {
  if (options.steps < 1) throw InvalidArgument("invert_embedding: steps must be >= 1");
  if (!(options.lr > 0.0)) throw InvalidArgument("invert_embedding: lr must be positive");
  if (init.values.empty()) throw InvalidArgument("invert_embedding: empty embedding");
  if (!backend.embedding_sensitive())
    throw InvalidArgument("invert_embedding: backend predictions do not depend on the embedding");

  const Raster clean = Raster::from_image(image);
  PromptEmbedding e = init;
  const std::size_t dim = e.values.size();
  std::vector<double> m(dim, 0.0);
  std::vector<double> v(dim, 0.0);
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.99;
  constexpr double adam_eps = 1e-8;

  for (int step = 0; step < options.steps; ++step) {
    const int t = sample_timestep(schedule, options.t_min_fraction, options.t_max_fraction, rng);
    const Raster eps = gaussian_raster(clean.width, clean.height, clean.channels, rng);
    const Raster noisy = add_noise(clean, t, eps, schedule);

    ScorePrediction pred = backend.predict({noisy, t, nullptr, e, nullptr, &eps});
    std::vector<double> grad;
    if (pred.embedding_grad) {
      grad = std::move(*pred.embedding_grad);
      if (grad.size() != dim) throw RemoteError("invert_embedding: embedding gradient has wrong dimension");
    } else {
      // forward-difference probes over each embedding coordinate
      const double base = mean_squared_residual(pred.eps, eps);
      grad.assign(dim, 0.0);
      bool sensitive = false;
      for (std::size_t j = 0; j < dim; ++j) {
        PromptEmbedding probe = e;
        probe.values[j] += options.probe_step;
        const ScorePrediction p = backend.predict({noisy, t, nullptr, probe, nullptr, nullptr});
        sensitive = sensitive || p.eps.data != pred.eps.data;
        grad[j] = (mean_squared_residual(p.eps, eps) - base) / options.probe_step;
      }
      if (!sensitive && step == 0)
        throw InvalidArgument("invert_embedding: backend predictions do not change with the embedding");
    }

    const double lr = options.lr * 0.5 * (1.0 + std::cos(kPi * step / options.steps));
    const double bc1 = 1.0 - std::pow(beta1, step + 1);
    const double bc2 = 1.0 - std::pow(beta2, step + 1);
    for (std::size_t j = 0; j < dim; ++j) {
      if (!std::isfinite(grad[j])) throw NumericError("invert_embedding: non-finite gradient");
      m[j] = beta1 * m[j] + (1.0 - beta1) * grad[j];
      v[j] = beta2 * v[j] + (1.0 - beta2) * grad[j] * grad[j];
      e.values[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + adam_eps);
    }
  }
  return e;
}

}  // namespace voxlift
