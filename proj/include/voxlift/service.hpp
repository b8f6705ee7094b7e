#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "voxlift/pipeline.hpp"

namespace httplib {
class Server;
}

namespace voxlift {

enum class JobState { Queued, Running, Done, Failed };

std::string to_string(JobState state);

struct JobStatus {
  std::string id;
  JobState state = JobState::Queued;
  std::string stage;
  int iteration = 0;  // completed optimization steps
  int iterations = 0;
  std::vector<double> proxy_loss_tail;
  std::string error;  // "stage: cause" when failed
  /// Seconds since service start; negative until reached.
  double started_at = -1.0;
  double finished_at = -1.0;
};

struct ServiceConfig {
  /// Job output directories are created below this root unless a job's config names one.
  std::filesystem::path jobs_root = "voxlift-jobs";
  std::size_t trace_tail = 32;
};

/// Job registry plus a single FIFO worker: at most one reconstruction runs at a
/// time. Reads are safe from any thread.
class JobService {
 public:
  explicit JobService(ServiceConfig cfg = {});
  ~JobService();
  JobService(const JobService&) = delete;
  JobService& operator=(const JobService&) = delete;

  /// Validates and enqueues; returns the job id.
  std::string submit(PipelineConfig cfg);
  std::optional<JobStatus> status(const std::string& id) const;
  /// Current field of a running job (snapshot between steps) or the final field.
  std::optional<VoxelRadianceField> field(const std::string& id) const;
  std::optional<PipelineConfig> config(const std::string& id) const;
  /// Blocks until the job is done or failed.
  JobStatus wait(const std::string& id) const;

  /// Registers the HTTP routes on `server`.
  void mount(httplib::Server& server);

 private:
  struct Job;

  void worker_loop();
  double now() const;

  ServiceConfig cfg_;
  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::uint64_t next_id_ = 1;
  bool stopping_ = false;
  std::chrono::steady_clock::time_point start_;
  std::thread worker_;
};

/// Config keys accepted in POST /v1/jobs {"config": {...}}; values may be JSON
/// strings, numbers or booleans.
PipelineConfig config_from_json(const std::string& body);

}  // namespace voxlift
