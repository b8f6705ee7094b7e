#include "voxlift/sds.hpp"

#include <chrono>
#include <cmath>
#include <istream>
#include <memory>
#include <mutex>
#include <json.hpp>
#include <ostream>
#include <string>

#include "voxlift/error.hpp"

namespace voxlift {

void SDSConfig::validate() const {
  if (iterations < 0) throw InvalidArgument("iterations must be >= 0");
  if (!(lr_density > 0.0 && lr_color > 0.0)) throw InvalidArgument("learning rates must be positive");
  if (!(adam_eps > 0.0)) throw InvalidArgument("adam_eps must be positive");
  if (!(t_min_fraction > 0.0 && t_min_fraction <= t_max_fraction && t_max_fraction <= 1.0))
    throw InvalidArgument("t range must lie within (0, 1]");
  if (render_size < 1) throw InvalidArgument("render size must be >= 1");
  if (samples_per_ray < 2) throw InvalidArgument("samples_per_ray must be >= 2");
  if (!(anchor_weight >= 0.0)) throw InvalidArgument("anchor weight must be >= 0");
  if (poses.elevation_min > poses.elevation_max) throw InvalidArgument("empty elevation range");
}

OptimizerState OptimizerState::for_field(const VoxelRadianceField& field) {
  OptimizerState s;
  s.m_density.assign(field.density().size(), 0.0);
  s.v_density.assign(field.density().size(), 0.0);
  s.m_color.assign(field.color().size(), 0.0);
  s.v_color.assign(field.color().size(), 0.0);
  return s;
}

void TrainTrace::write_jsonl(std::ostream& out) const {
  for (const auto& r : records) {
    nlohmann::json j{{"iteration", r.iteration},   {"azimuth", r.azimuth},       {"elevation", r.elevation},
                     {"t", r.t},                   {"proxy_loss", r.proxy_loss}, {"wall_seconds", r.wall_seconds}};
    out << j.dump() << '\n';
  }
}

TrainTrace TrainTrace::read_jsonl(std::istream& in) {
  TrainTrace trace;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TraceRecord r;
    r.iteration = j.at("iteration").get<int>();
    r.azimuth = j.at("azimuth").get<double>();
    r.elevation = j.at("elevation").get<double>();
    r.t = j.at("t").get<int>();
    r.proxy_loss = j.at("proxy_loss").get<double>();
    r.wall_seconds = j.at("wall_seconds").get<double>();
    trace.records.push_back(r);
  }
  return trace;
}

StepDraw draw_step(const SDSConfig& cfg, const DiffusionSchedule& schedule, int iteration) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(iteration)};
  Rng rng(seq);
  StepDraw d;
  if (!cfg.training_poses.empty()) {
    std::uniform_int_distribution<std::size_t> pick(0, cfg.training_poses.size() - 1);
    const PoseAngles& a = cfg.training_poses[pick(rng)];
    d.pose = make_pose(a.azimuth, a.elevation, cfg.poses.radius, cfg.poses.fov_y);
  } else {
    d.pose = sample_pose(rng, cfg.poses);
  }
  d.t = sample_timestep(schedule, cfg.t_min_fraction, cfg.t_max_fraction, rng);
  d.jitter_seed = rng();
  d.noise = gaussian_raster(cfg.render_size, cfg.render_size, 3, rng);
  return d;
}

double sds_weight(WeightMode mode, const DiffusionSchedule& schedule, int t) {
  switch (mode) {
    case WeightMode::Constant:
      return 1.0;
    case WeightMode::SqrtOneMinusAlphaBar:
      return std::sqrt(1.0 - schedule.alpha_bar(t));
  }
  return 1.0;
}

SdsGradient sds_gradient(const VoxelRadianceField& field, const ScoreBackend& backend,
                         const DiffusionSchedule& schedule, const PromptEmbedding& embedding,
                         const DepthConditioning* depth, const CameraPose& pose, int t, const Raster& noise,
                         const RenderSettings& settings, int size, double weight) {
  const RenderResult x = render(field, pose, size, size, settings);
  const Raster noisy = add_noise(Raster::from_image(x.image), t, noise, schedule);
  const ScorePrediction pred = backend.predict({noisy, t, depth, embedding, &pose, nullptr});
  if (!pred.eps.same_shape(noise)) throw RemoteError("score backend returned a prediction of the wrong shape");

  SdsGradient out;
  std::vector<double> upstream(noise.size());
  double sq = 0.0;
  for (std::size_t i = 0; i < upstream.size(); ++i) {
    const double r = pred.eps.data[i] - noise.data[i];
    sq += r * r;
    upstream[i] = weight * r;
  }
  out.proxy_loss = sq / static_cast<double>(upstream.size());
  out.grad = render_backward(field, pose, size, size, settings, upstream);
  return out;
}

FieldGradients anchor_gradient(const VoxelRadianceField& field, const AnchorView& anchor,
                               const RenderSettings& settings) {
  return photometric_gradient(field, anchor.pose, anchor.image, anchor.weight, settings).grad;
}

void adam_update(VoxelRadianceField& field, const FieldGradients& grad, OptimizerState& state,
                 const SDSConfig& cfg) {
  if (!grad.all_finite()) throw NumericError("non-finite gradient");
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(state.step));
  auto update = [&](std::span<float> params, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v, double lr) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
      if (g[i] == 0.0 && m[i] == 0.0) continue;
      params[i] = static_cast<float>(params[i] - lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps));
    }
  };
  update(field.density(), grad.density, state.m_density, state.v_density, cfg.lr_density);
  update(field.color(), grad.color, state.m_color, state.v_color, cfg.lr_color);
}

TraceRecord sds_step(VoxelRadianceField& field, const ScoreBackend& backend, const DiffusionSchedule& schedule,
                     const PromptEmbedding& embedding, const DepthProvider& depth_provider, const SDSConfig& cfg,
                     OptimizerState& state, int iteration, const AnchorView* anchor) {
  const StepDraw draw = draw_step(cfg, schedule, iteration);
  RenderSettings settings;
  settings.samples_per_ray = cfg.samples_per_ray;
  settings.jitter = cfg.jitter;
  settings.seed = draw.jitter_seed;
  settings.min_transmittance = cfg.min_transmittance;

  std::optional<DepthConditioning> depth;
  if (depth_provider) depth = depth_provider(draw.pose);

  SdsGradient step;
  try {
    step = sds_gradient(field, backend, schedule, embedding, depth ? &*depth : nullptr, draw.pose, draw.t,
                        draw.noise, settings, cfg.render_size, sds_weight(cfg.weight_mode, schedule, draw.t));
  } catch (const Error& e) {
    throw Error("iteration " + std::to_string(iteration) + ": score backend failed: " + e.what());
  }
  if (anchor != nullptr && anchor->weight > 0.0) step.grad.add(anchor_gradient(field, *anchor, settings));
  if (!step.grad.all_finite())
    throw NumericError("iteration " + std::to_string(iteration) + ": non-finite gradient");

  adam_update(field, step.grad, state, cfg);
  field.check_finite();

  TraceRecord rec;
  rec.iteration = iteration;
  rec.azimuth = pose_azimuth(draw.pose);
  rec.elevation = pose_elevation(draw.pose);
  rec.t = draw.t;
  rec.proxy_loss = step.proxy_loss;
  return rec;
}

DepthProvider memoized_depth_provider(PointCloud cloud, int render_size, int out_size) {
  struct Cache {
    std::mutex mutex;
    std::map<PoseKey, DepthConditioning> entries;
  };
  auto cache = std::make_shared<Cache>();
  auto shared_cloud = std::make_shared<const PointCloud>(std::move(cloud));
  return [cache, shared_cloud, render_size, out_size](const CameraPose& pose) {
    const PoseKey key = PoseKey::from_pose(pose);
    {
      std::lock_guard lock(cache->mutex);
      if (auto it = cache->entries.find(key); it != cache->entries.end()) return it->second;
    }
    DepthConditioning cond = encode_depth(project_depth(*shared_cloud, pose, render_size, render_size), out_size);
    std::lock_guard lock(cache->mutex);
    return cache->entries.emplace(key, std::move(cond)).first->second;
  };
}

Reconstruction reconstruct(const ReconstructionInputs& inputs, const SDSConfig& cfg, const StepCallback& on_step) {
  cfg.validate();
  if (inputs.backend == nullptr) throw InvalidArgument("reconstruct: no score backend");
  if (inputs.schedule.steps() < 1) throw InvalidArgument("reconstruct: empty schedule");

  Reconstruction out{init_field(cfg.resolution, cfg.bounds, cfg.init_density, cfg.init_color), {}};
  if (cfg.iterations == 0) return out;

  DepthProvider depth;
  if (!inputs.cloud.points.empty()) {
    const int size = inputs.depth_size > 0 ? inputs.depth_size : cfg.render_size;
    depth = memoized_depth_provider(inputs.cloud, cfg.render_size, size);
  }
  std::optional<AnchorView> anchor;
  if (!inputs.image.empty() && cfg.anchor_weight > 0.0) anchor = AnchorView{inputs.input_pose, inputs.image, cfg.anchor_weight};

  OptimizerState state = OptimizerState::for_field(out.field);
  out.trace.records.reserve(static_cast<std::size_t>(cfg.iterations));
  const auto start = std::chrono::steady_clock::now();
  for (int it = 0; it < cfg.iterations; ++it) {
    TraceRecord rec = sds_step(out.field, *inputs.backend, inputs.schedule, inputs.embedding, depth, cfg, state, it,
                               anchor ? &*anchor : nullptr);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.trace.records.push_back(rec);
    if (on_step) on_step(out.field, rec);
  }
  return out;
}

}  // namespace voxlift
