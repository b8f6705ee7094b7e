#include "voxlift/pipeline.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <memory>
#include <sstream>

#include "voxlift/error.hpp"
#include "voxlift/fixture.hpp"
#include "voxlift/remote.hpp"
#include "voxlift/segment.hpp"

namespace voxlift {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size() || !std::isfinite(v)) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("config: '" + key + "' expects a number, got '" + value + "'");
  }
}

long long parse_int(const std::string& key, const std::string& value) {
  long long v = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size())
    throw InvalidArgument("config: '" + key + "' expects an integer, got '" + value + "'");
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw InvalidArgument("config: '" + key + "' expects true or false, got '" + value + "'");
}

std::vector<int> parse_int_list(const std::string& key, const std::string& value, std::size_t count) {
  std::vector<int> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(static_cast<int>(parse_int(key, trim(item))));
  if (out.size() != count)
    throw InvalidArgument("config: '" + key + "' expects " + std::to_string(count) + " comma-separated integers");
  return out;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string absolute_or_empty(const fs::path& p) { return p.empty() ? std::string() : fs::absolute(p).string(); }

// Runs one stage, converting any library error into a StageError naming it.
template <typename F>
auto stage(const PipelineObserver& observer, const std::string& name, F&& body) {
  if (observer.on_stage) observer.on_stage(name);
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

SensorWindow crop_window(const BBox& box, int width, int height) {
  return {static_cast<double>(box.x0) / width, static_cast<double>(box.y0) / height,
          static_cast<double>(box.x1 + 1) / width, static_cast<double>(box.y1 + 1) / height,
          static_cast<double>(width) / height};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw IoError("cannot write " + path.string());
}

}  // namespace

void PipelineConfig::validate() const {
  if (image.empty()) throw InvalidArgument("config: no input image");
  if (!fs::exists(image)) throw IoError("config: input image not found: " + image.string());
  if (!prompt) throw InvalidArgument("config: no point or box prompt");
  if (backend == BackendKind::Remote && remote_url.empty()) throw InvalidArgument("config: remote backend needs remote_url");
  if (remote_segment && remote_url.empty()) throw InvalidArgument("config: remote_segment needs remote_url");
  if (!(segment_tau > 0.0)) throw InvalidArgument("config: tau must be positive");
  if (crop_margin < 0) throw InvalidArgument("config: margin must be >= 0");
  if (embedding_dim < 1) throw InvalidArgument("config: embedding_dim must be >= 1");
  if (inversion_steps < 0) throw InvalidArgument("config: inversion_steps must be >= 0");
  if (!(inversion_lr > 0.0)) throw InvalidArgument("config: inversion_lr must be positive");
  if (view_count < 1 || view_size < 1) throw InvalidArgument("config: views and view_size must be >= 1");
  if (!ground_truth.empty() && !fs::exists(ground_truth))
    throw IoError("config: ground truth grid not found: " + ground_truth.string());
  if (!point_cloud.empty() && !fs::exists(point_cloud))
    throw IoError("config: point cloud not found: " + point_cloud.string());
  if (out_dir.empty()) throw InvalidArgument("config: no output directory");
  if (fs::exists(out_dir) && !fs::is_directory(out_dir))
    throw InvalidArgument("config: output path exists and is not a directory: " + out_dir.string());
  make_pose(input_azimuth, input_elevation, sds.poses.radius, sds.poses.fov_y);
  make_pose(0.0, view_elevation, sds.poses.radius, sds.poses.fov_y);
  sds.validate();
}

PipelineConfig default_pipeline_config() {
  PipelineConfig cfg;
  cfg.sds.training_poses = fixture::training_views();
  return cfg;
}

std::map<std::string, std::string> parse_config_text(std::string_view text) {
  std::map<std::string, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"') {
      const auto close = value.find('"', 1);
      if (close == std::string::npos)
        throw InvalidArgument("config line " + std::to_string(line_no) + ": unterminated string");
      value = value.substr(1, close - 1);
    } else if (const auto hash = value.find('#'); hash != std::string::npos) {
      value = trim(value.substr(0, hash));
    }
    if (key.empty()) throw InvalidArgument("config line " + std::to_string(line_no) + ": empty key");
    out[key] = value;
  }
  return out;
}

void apply_setting(PipelineConfig& cfg, const std::string& key, const std::string& value) {
  SDSConfig& s = cfg.sds;
  if (key == "image") {
    cfg.image = value;
  } else if (key == "point") {
    const auto v = parse_int_list(key, value, 2);
    cfg.prompt = PromptAnnotation::point(v[0], v[1]);
  } else if (key == "box") {
    const auto v = parse_int_list(key, value, 4);
    cfg.prompt = PromptAnnotation::from_box({v[0], v[1], v[2], v[3]});
  } else if (key == "backend") {
    if (value == "analytic") {
      cfg.backend = BackendKind::Analytic;
    } else if (value == "remote") {
      cfg.backend = BackendKind::Remote;
    } else {
      throw InvalidArgument("config: backend must be analytic or remote");
    }
  } else if (key == "remote_url") {
    cfg.remote_url = value;
  } else if (key == "remote_segment") {
    cfg.remote_segment = parse_bool(key, value);
  } else if (key == "tau") {
    cfg.segment_tau = parse_double(key, value);
  } else if (key == "margin") {
    cfg.crop_margin = static_cast<int>(parse_int(key, value));
  } else if (key == "input_azimuth") {
    cfg.input_azimuth = deg2rad(parse_double(key, value));
  } else if (key == "input_elevation") {
    cfg.input_elevation = deg2rad(parse_double(key, value));
  } else if (key == "iters") {
    s.iterations = static_cast<int>(parse_int(key, value));
  } else if (key == "seed") {
    s.seed = static_cast<std::uint64_t>(parse_int(key, value));
  } else if (key == "lr_density") {
    s.lr_density = parse_double(key, value);
  } else if (key == "lr_color") {
    s.lr_color = parse_double(key, value);
  } else if (key == "adam_eps") {
    s.adam_eps = parse_double(key, value);
  } else if (key == "weight_mode") {
    if (value == "constant") {
      s.weight_mode = WeightMode::Constant;
    } else if (value == "sqrt_one_minus_alpha_bar") {
      s.weight_mode = WeightMode::SqrtOneMinusAlphaBar;
    } else {
      throw InvalidArgument("config: weight_mode must be constant or sqrt_one_minus_alpha_bar");
    }
  } else if (key == "t_min") {
    s.t_min_fraction = parse_double(key, value);
  } else if (key == "t_max") {
    s.t_max_fraction = parse_double(key, value);
  } else if (key == "render_size") {
    s.render_size = static_cast<int>(parse_int(key, value));
  } else if (key == "samples_per_ray") {
    s.samples_per_ray = static_cast<int>(parse_int(key, value));
  } else if (key == "jitter") {
    s.jitter = parse_bool(key, value);
  } else if (key == "min_transmittance") {
    s.min_transmittance = parse_double(key, value);
  } else if (key == "anchor_weight") {
    s.anchor_weight = parse_double(key, value);
  } else if (key == "init_density") {
    s.init_density = parse_double(key, value);
  } else if (key == "resolution") {
    const auto v = parse_int_list(key, value, 3);
    s.resolution = {v[0], v[1], v[2]};
  } else if (key == "elevation_min") {
    s.poses.elevation_min = deg2rad(parse_double(key, value));
  } else if (key == "elevation_max") {
    s.poses.elevation_max = deg2rad(parse_double(key, value));
  } else if (key == "radius") {
    s.poses.radius = parse_double(key, value);
  } else if (key == "fov") {
    s.poses.fov_y = deg2rad(parse_double(key, value));
  } else if (key == "training_views") {
    if (value == "buckets") {
      s.training_poses = fixture::training_views();
    } else if (value == "sampled") {
      s.training_poses.clear();
    } else {
      throw InvalidArgument("config: training_views must be buckets or sampled");
    }
  } else if (key == "embedding_dim") {
    cfg.embedding_dim = static_cast<int>(parse_int(key, value));
  } else if (key == "inversion_steps") {
    cfg.inversion_steps = static_cast<int>(parse_int(key, value));
  } else if (key == "inversion_lr") {
    cfg.inversion_lr = parse_double(key, value);
  } else if (key == "ground_truth") {
    cfg.ground_truth = value;
  } else if (key == "point_cloud") {
    cfg.point_cloud = value;
  } else if (key == "views") {
    cfg.view_count = static_cast<int>(parse_int(key, value));
  } else if (key == "view_size") {
    cfg.view_size = static_cast<int>(parse_int(key, value));
  } else if (key == "view_elevation") {
    cfg.view_elevation = deg2rad(parse_double(key, value));
  } else if (key == "out") {
    cfg.out_dir = value;
  } else {
    throw InvalidArgument("config: unknown key '" + key + "'");
  }
}

PipelineConfig load_pipeline_config(const fs::path& path, PipelineConfig base) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  for (const auto& [k, v] : parse_config_text(ss.str())) apply_setting(base, k, v);
  return base;
}

std::string to_config_text(const PipelineConfig& cfg) {
  const SDSConfig& s = cfg.sds;
  std::ostringstream o;
  o << "image = " << quoted(absolute_or_empty(cfg.image)) << '\n';
  if (cfg.prompt) {
    const auto& p = *cfg.prompt;
    if (p.kind == PromptAnnotation::Kind::Point) {
      o << "point = \"" << p.x << ',' << p.y << "\"\n";
    } else {
      o << "box = \"" << p.box.x0 << ',' << p.box.y0 << ',' << p.box.x1 << ',' << p.box.y1 << "\"\n";
    }
  }
  o << "backend = " << (cfg.backend == BackendKind::Analytic ? "analytic" : "remote") << '\n';
  o << "remote_url = " << quoted(cfg.remote_url) << '\n';
  o << "remote_segment = " << (cfg.remote_segment ? "true" : "false") << '\n';
  o << "tau = " << fmt(cfg.segment_tau) << '\n';
  o << "margin = " << cfg.crop_margin << '\n';
  o << "input_azimuth = " << fmt(rad2deg(cfg.input_azimuth)) << '\n';
  o << "input_elevation = " << fmt(rad2deg(cfg.input_elevation)) << '\n';
  o << "iters = " << s.iterations << '\n';
  o << "seed = " << s.seed << '\n';
  o << "lr_density = " << fmt(s.lr_density) << '\n';
  o << "lr_color = " << fmt(s.lr_color) << '\n';
  o << "adam_eps = " << fmt(s.adam_eps) << '\n';
  o << "weight_mode = " << (s.weight_mode == WeightMode::Constant ? "constant" : "sqrt_one_minus_alpha_bar") << '\n';
  o << "t_min = " << fmt(s.t_min_fraction) << '\n';
  o << "t_max = " << fmt(s.t_max_fraction) << '\n';
  o << "render_size = " << s.render_size << '\n';
  o << "samples_per_ray = " << s.samples_per_ray << '\n';
  o << "jitter = " << (s.jitter ? "true" : "false") << '\n';
  o << "min_transmittance = " << fmt(s.min_transmittance) << '\n';
  o << "anchor_weight = " << fmt(s.anchor_weight) << '\n';
  o << "init_density = " << fmt(s.init_density) << '\n';
  o << "resolution = \"" << s.resolution.nx << ',' << s.resolution.ny << ',' << s.resolution.nz << "\"\n";
  o << "elevation_min = " << fmt(rad2deg(s.poses.elevation_min)) << '\n';
  o << "elevation_max = " << fmt(rad2deg(s.poses.elevation_max)) << '\n';
  o << "radius = " << fmt(s.poses.radius) << '\n';
  o << "fov = " << fmt(rad2deg(s.poses.fov_y)) << '\n';
  o << "training_views = " << (s.training_poses.empty() ? "sampled" : "buckets") << '\n';
  o << "embedding_dim = " << cfg.embedding_dim << '\n';
  o << "inversion_steps = " << cfg.inversion_steps << '\n';
  o << "inversion_lr = " << fmt(cfg.inversion_lr) << '\n';
  o << "ground_truth = " << quoted(absolute_or_empty(cfg.ground_truth)) << '\n';
  o << "point_cloud = " << quoted(absolute_or_empty(cfg.point_cloud)) << '\n';
  o << "views = " << cfg.view_count << '\n';
  o << "view_size = " << cfg.view_size << '\n';
  o << "view_elevation = " << fmt(rad2deg(cfg.view_elevation)) << '\n';
  o << "out = " << quoted(absolute_or_empty(cfg.out_dir)) << '\n';
  return o.str();
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const PipelineObserver& observer) {
  stage(observer, "config", [&] {
    cfg.validate();
    if (cfg.backend == BackendKind::Analytic && cfg.sds.training_poses.empty())
      throw InvalidArgument("config: the analytic oracle needs bucketed training views");
    return 0;
  });
  const SDSConfig& sds = cfg.sds;
  const PoseDistribution& poses = sds.poses;

  std::unique_ptr<RemoteClient> remote;
  if (!cfg.remote_url.empty() && (cfg.backend == BackendKind::Remote || cfg.remote_segment))
    remote = std::make_unique<RemoteClient>(cfg.remote_url);

  const Image image = stage(observer, "load", [&] { return load_image(cfg.image); });

  const Mask mask = stage(observer, "segment", [&] {
    cfg.prompt->validate(image.width(), image.height());
    if (cfg.remote_segment) return remote->segment(image, *cfg.prompt).mask;
    return segment_region_grow(image, *cfg.prompt, cfg.segment_tau);
  });

  BBox box;
  const Image patch = stage(observer, "crop", [&] {
    box = square_box(mask_to_bbox(mask, cfg.crop_margin), image.width(), image.height());
    return apply_mask_crop(image, mask, box, sds.render_size);
  });
  CameraPose input_pose = make_pose(cfg.input_azimuth, cfg.input_elevation, poses.radius, poses.fov_y);
  input_pose.window = crop_window(box, image.width(), image.height());

  std::optional<VoxelRadianceField> truth;
  if (!cfg.ground_truth.empty()) {
    truth = stage(observer, "ground-truth", [&] { return import_grid(cfg.ground_truth); });
  } else if (cfg.backend == BackendKind::Analytic) {
    truth = fixture::ground_truth_field(sds.resolution);
  }

  const DiffusionSchedule schedule = make_schedule();
  std::unique_ptr<ScoreBackend> oracle;
  const ScoreBackend* backend = remote.get();
  if (cfg.backend == BackendKind::Analytic) {
    oracle = std::make_unique<AnalyticOracle>(stage(observer, "oracle", [&] {
      return AnalyticOracle::per_pose(schedule, fixture::render_targets(*truth, sds.training_poses, poses,
                                                                        sds.render_size, sds.samples_per_ray));
    }));
    backend = oracle.get();
  }

  PipelineResult result{VoxelRadianceField(sds.resolution, sds.bounds), {}, box, std::nullopt, std::nullopt, cfg.out_dir};

  // The caption only names the object; turning it into e_0 is the bridge's
  // business, so the engine always starts inversion from zero.
  PromptEmbedding embedding = PromptEmbedding::zeros(static_cast<std::size_t>(cfg.embedding_dim));
  if (cfg.backend == BackendKind::Remote) {
    result.caption = stage(observer, "caption", [&] { return remote->caption(patch); });
    if (cfg.inversion_steps > 0) {
      embedding = stage(observer, "invert", [&] {
        InversionOptions opt;
        opt.steps = cfg.inversion_steps;
        opt.lr = cfg.inversion_lr;
        Rng rng(sds.seed ^ 0x9e3779b97f4a7c15ULL);
        return invert_embedding(patch, *backend, schedule, embedding, opt, rng);
      });
    }
  }

  const PointCloud cloud = stage(observer, "pointcloud", [&] {
    if (!cfg.point_cloud.empty()) return normalize_cloud(load_ply(cfg.point_cloud));
    if (cfg.backend == BackendKind::Remote) {
      try {
        return normalize_cloud(remote->pointcloud(patch));
      } catch (const RemoteError&) {
        // local fallback below
      }
    }
    if (truth) return fixture::sample_cloud(*truth, 4096, 1.0, sds.seed);
    return sphere_shell_cloud(4096, 1.0, sds.seed);
  });

  Reconstruction rec = stage(observer, "sds", [&] {
    ReconstructionInputs in;
    in.image = patch;
    in.input_pose = input_pose;
    in.cloud = cloud;
    in.embedding = embedding;
    in.backend = backend;
    in.schedule = schedule;
    return reconstruct(in, sds, observer.on_step);
  });
  result.field = std::move(rec.field);
  result.trace = std::move(rec.trace);

  const RenderSettings view_settings = fixture::evaluation_settings(sds.samples_per_ray);
  std::vector<Image> views = stage(observer, "render", [&] {
    std::vector<Image> out;
    for (int k = 0; k < cfg.view_count; ++k) {
      const double az = 2.0 * kPi * k / cfg.view_count;
      const CameraPose pose = make_pose(az, cfg.view_elevation, poses.radius, poses.fov_y);
      out.push_back(render(result.field, pose, cfg.view_size, cfg.view_size, view_settings).image);
    }
    if (truth)
      result.held_out_psnr =
          fixture::mean_psnr(result.field, *truth, fixture::held_out_views(), poses, sds.render_size, sds.samples_per_ray);
    return out;
  });

  stage(observer, "export", [&] {
    const fs::path dir = cfg.out_dir;
    fs::create_directories(dir / "views");
    save_image(patch, dir / "patch.png");
    save_mask(mask, dir / "mask.png");
    export_grid(result.field, dir / "field.vxrf");
    {
      std::ofstream trace(dir / "trace.jsonl", std::ios::binary);
      result.trace.write_jsonl(trace);
      if (!trace) throw IoError("cannot write trace log");
    }
    for (std::size_t k = 0; k < views.size(); ++k)
      save_image(views[k], dir / "views" / ("view_" + std::to_string(k) + ".png"));
    write_text(dir / "config.toml", to_config_text(cfg));

    nlohmann::json summary{{"iterations", result.trace.records.size()},
                           {"crop_box", {box.x0, box.y0, box.x1, box.y1}},
                           {"backend", cfg.backend == BackendKind::Analytic ? "analytic" : "remote"},
                           {"seed", sds.seed}};
    nlohmann::json azimuths = nlohmann::json::array();
    for (int k = 0; k < cfg.view_count; ++k) azimuths.push_back(360.0 * k / cfg.view_count);
    summary["view_azimuths_deg"] = azimuths;
    summary["caption"] = result.caption ? nlohmann::json(*result.caption) : nlohmann::json();
    summary["held_out_psnr"] = result.held_out_psnr ? nlohmann::json(*result.held_out_psnr) : nlohmann::json();
    summary["final_proxy_loss"] =
        result.trace.records.empty() ? nlohmann::json() : nlohmann::json(result.trace.records.back().proxy_loss);
    write_text(dir / "summary.json", summary.dump(2) + "\n");
    return 0;
  });
  return result;
}

fs::path write_fixture(const fs::path& dir, int image_size, int iterations) {
  if (image_size < 16) throw InvalidArgument("fixture image size must be >= 16");
  PipelineConfig cfg = default_pipeline_config();
  const VoxelRadianceField truth = fixture::ground_truth_field(cfg.sds.resolution);
  const CameraPose pose = make_pose(cfg.input_azimuth, cfg.input_elevation, cfg.sds.poses.radius, cfg.sds.poses.fov_y);
  const Image input = render(truth, pose, image_size, image_size, fixture::evaluation_settings(256)).image;

  fs::create_directories(dir);
  cfg.image = dir / "input.png";
  cfg.prompt = PromptAnnotation::point(image_size / 2, image_size / 2);
  cfg.sds.iterations = iterations;
  cfg.out_dir = dir / "out";
  save_image(input, cfg.image);
  const fs::path config_path = dir / "config.toml";
  write_text(config_path, to_config_text(cfg));
  return config_path;
}

}  // namespace voxlift
