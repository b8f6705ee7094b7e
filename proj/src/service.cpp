#include "voxlift/service.hpp"

#include <httplib.h>

#include <chrono>
#include <json.hpp>

#include "voxlift/error.hpp"
#include "voxlift/fixture.hpp"
#include "voxlift/segment.hpp"
#include "voxlift/wire.hpp"

namespace voxlift {

using wire::Json;

struct JobService::Job {
  std::string id;
  PipelineConfig config;
  JobStatus status;
  std::optional<VoxelRadianceField> field;
};

std::string to_string(JobState state) {
  switch (state) {
    case JobState::Queued:
      return "queued";
    case JobState::Running:
      return "running";
    case JobState::Done:
      return "done";
    case JobState::Failed:
      return "failed";
  }
  return "unknown";
}

PipelineConfig config_from_json(const std::string& body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw InvalidArgument("request body is not valid JSON");
  }
  if (!j.is_object() || !j.contains("config") || !j["config"].is_object())
    throw InvalidArgument("request body needs a 'config' object");
  PipelineConfig cfg = default_pipeline_config();
  for (const auto& [key, value] : j["config"].items()) {
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_boolean()) {
      text = value.get<bool>() ? "true" : "false";
    } else if (value.is_number_integer()) {
      text = std::to_string(value.get<long long>());
    } else if (value.is_number()) {
      text = value.dump();
    } else if (value.is_array()) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        if (!value[i].is_number_integer()) throw InvalidArgument("config: '" + key + "' must be integers");
        text += (i ? "," : "") + std::to_string(value[i].get<long long>());
      }
    } else {
      throw InvalidArgument("config: unsupported value for '" + key + "'");
    }
    apply_setting(cfg, key, text);
  }
  return cfg;
}

JobService::JobService(ServiceConfig cfg)
    : cfg_(std::move(cfg)), start_(std::chrono::steady_clock::now()), worker_([this] { worker_loop(); }) {}

JobService::~JobService() {
  {
    std::lock_guard lock(mutex_);
    stopping_ = true;
  }
  changed_.notify_all();
  worker_.join();
}

double JobService::now() const {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
}

std::string JobService::submit(PipelineConfig cfg) {
  std::lock_guard lock(mutex_);
  auto job = std::make_shared<Job>();
  job->id = "job-" + std::to_string(next_id_++);
  if (cfg.out_dir.empty()) cfg.out_dir = cfg_.jobs_root / job->id;
  cfg.validate();
  job->config = std::move(cfg);
  job->status.id = job->id;
  job->status.iterations = job->config.sds.iterations;
  jobs_.emplace(job->id, job);
  queue_.push_back(job);
  changed_.notify_all();
  return job->id;
}

std::optional<JobStatus> JobService::status(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second->status;
}

std::optional<VoxelRadianceField> JobService::field(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second->field;
}

std::optional<PipelineConfig> JobService::config(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second->config;
}

JobStatus JobService::wait(const std::string& id) const {
  std::unique_lock lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) throw InvalidArgument("unknown job " + id);
  const auto job = it->second;
  changed_.wait(lock, [&] { return job->status.state == JobState::Done || job->status.state == JobState::Failed; });
  return job->status;
}

void JobService::worker_loop() {
  for (;;) {
    std::shared_ptr<Job> job;
    {
      std::unique_lock lock(mutex_);
      changed_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      job = queue_.front();
      queue_.pop_front();
      job->status.state = JobState::Running;
      job->status.started_at = now();
    }
    changed_.notify_all();

    PipelineObserver observer;
    observer.on_stage = [&](const std::string& stage) {
      std::lock_guard lock(mutex_);
      job->status.stage = stage;
    };
    observer.on_step = [&](const VoxelRadianceField& f, const TraceRecord& rec) {
      std::lock_guard lock(mutex_);
      if (stopping_) throw Error("service shutting down");
      job->field = f;
      job->status.iteration = rec.iteration + 1;
      auto& tail = job->status.proxy_loss_tail;
      tail.push_back(rec.proxy_loss);
      if (tail.size() > cfg_.trace_tail) tail.erase(tail.begin());
    };

    try {
      PipelineResult result = run_pipeline(job->config, observer);
      std::lock_guard lock(mutex_);
      job->field = std::move(result.field);
      job->status.state = JobState::Done;
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex_);
      job->status.state = JobState::Failed;
      job->status.error = e.what();
    }
    {
      std::lock_guard lock(mutex_);
      job->status.finished_at = now();
    }
    changed_.notify_all();
  }
}

namespace {

Json status_json(const JobStatus& s) {
  Json j{{"id", s.id},
         {"state", to_string(s.state)},
         {"stage", s.stage},
         {"iteration", s.iteration},
         {"iterations", s.iterations},
         {"proxy_loss_tail", s.proxy_loss_tail}};
  j["started_at"] = s.started_at >= 0.0 ? Json(s.started_at) : Json();
  j["finished_at"] = s.finished_at >= 0.0 ? Json(s.finished_at) : Json();
  j["error"] = s.state == JobState::Failed ? Json(s.error) : Json();
  return j;
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view message) {
  res.status = status;
  res.set_content(wire::error_body(code, message).dump(), "application/json");
}

double query_double(const httplib::Request& req, const std::string& key, double fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string v = req.get_param_value(key);
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw InvalidArgument("query parameter '" + key + "' must be a number");
  }
}

}  // namespace

void JobService::mount(httplib::Server& server) {
  server.Post("/v1/jobs", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      const std::string id = submit(config_from_json(req.body));
      res.status = 201;
      res.set_content(Json{{"id", id}}.dump(), "application/json");
    } catch (const Error& e) {
      send_error(res, 400, "invalid_config", e.what());
    }
  });

  server.Get(R"(/v1/jobs/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const auto s = status(req.matches[1]);
    if (!s) return send_error(res, 404, "not_found", "no job " + std::string(req.matches[1]));
    res.set_content(status_json(*s).dump(), "application/json");
  });

  server.Get(R"(/v1/jobs/([^/]+)/render)", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto cfg = config(id);
    if (!cfg) return send_error(res, 404, "not_found", "no job " + id);
    try {
      const double az = query_double(req, "azimuth", 0.0);
      const double el = query_double(req, "elevation", 0.0);
      const double size = query_double(req, "size", cfg->view_size);
      if (size < 1 || size > 1024 || size != std::floor(size))
        throw InvalidArgument("size must be an integer in [1, 1024]");
      const auto f = field(id);
      if (!f) return send_error(res, 409, "not_ready", "job " + id + " has no field yet");
      const CameraPose pose = make_pose(deg2rad(az), deg2rad(el), cfg->sds.poses.radius, cfg->sds.poses.fov_y);
      const int n = static_cast<int>(size);
      const Image img = render(*f, pose, n, n, fixture::evaluation_settings(cfg->sds.samples_per_ray)).image;
      const auto png = encode_png(img);
      res.set_content(std::string(png.begin(), png.end()), "image/png");
    } catch (const Error& e) {
      send_error(res, 400, "bad_request", e.what());
    }
  });

  server.Post("/v1/segment", [](const httplib::Request& req, httplib::Response& res) {
    try {
      Json j;
      try {
        j = Json::parse(req.body);
      } catch (const nlohmann::json::parse_error&) {
        throw DecodeError("request body is not valid JSON");
      }
      if (!j.is_object() || !j.contains("image_png_b64") || !j.contains("prompt"))
        throw DecodeError("request needs 'image_png_b64' and 'prompt'");
      const Image image = wire::decode_image_b64(j["image_png_b64"]);
      const PromptAnnotation prompt = wire::decode_prompt(j["prompt"]);
      double tau = 0.1;
      if (j.contains("tau")) {
        if (!j["tau"].is_number()) throw DecodeError("'tau' must be a number");
        tau = j["tau"].get<double>();
      }
      const Mask mask = segment_region_grow(image, prompt, tau);
      const auto png = encode_mask_png(mask);
      res.set_content(Json{{"mask_png_b64", wire::base64_encode(png)}, {"bbox", wire::encode_bbox(mask_to_bbox(mask, 0))}}.dump(),
                      "application/json");
    } catch (const DecodeError& e) {
      send_error(res, 400, "bad_request", e.what());
    } catch (const Error& e) {
      send_error(res, 400, "invalid_prompt", e.what());
    }
  });
}

}  // namespace voxlift
