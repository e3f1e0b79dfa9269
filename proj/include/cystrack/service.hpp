// Copyright 2026 The cystrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "cystrack/error.hpp"
#include "cystrack/pipeline.hpp"
#include "cystrack/tracking.hpp"

#include <json.hpp>

#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace httplib {
class Server;
}

namespace cystrack {

/// An API failure with its HTTP status. `detail` carries the domain error
/// (code, entity, message) when there is one.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, std::string code, const std::string& message,
               nlohmann::json detail = nlohmann::json::object())
      : std::runtime_error(message), status_(status), code_(std::move(code)), detail_(std::move(detail)) {}
  int status() const noexcept { return status_; }
  const std::string& code() const noexcept { return code_; }
  const nlohmann::json& detail() const noexcept { return detail_; }
  nlohmann::json body() const;

 private:
  int status_;
  std::string code_;
  nlohmann::json detail_;
};

enum class JobState { queued, running, done, failed, cancelled };
const char* to_string(JobState s);
std::optional<JobState> job_state_from_string(std::string_view s);
/// The permitted edges: queued->running, queued->cancelled, and
/// running->{done, failed, cancelled}.
bool is_allowed_transition(JobState from, JobState to);

struct ServiceConfig {
  std::filesystem::path data_dir = "data";
  int workers = 1;              // 0: jobs only run through run_next_job()
  std::string auth_token;       // empty disables authentication
  std::string remote_url;       // default sidecar for backend "remote"
};

/// Reads DATA_DIR, AUTH_TOKEN and REMOTE_SEGMENTER_URL (BIND_ADDR is read by
/// the server front end).
ServiceConfig config_from_env(ServiceConfig base = {});

/// Creates the backend a job asked for. The default factory knows
/// "baseline" and "remote".
using BackendFactory =
    std::function<std::unique_ptr<SegmenterBackend>(const std::string& backend, const std::string& remote_url)>;

/// Projects, frame store, annotations and the job queue, persisted under
/// `data_dir`:
///
///   store/<sha256>.<ext>            content-addressed frames
///   projects/<id>/project.json      metadata and frame list
///   projects/<id>/annotation.json
///   jobs/<id>/job.json, annotation.json, report/
///
/// Every method returns the JSON body of the matching API response and
/// throws ServiceError on failure. Methods are safe to call concurrently.
class Service {
 public:
  explicit Service(ServiceConfig config, BackendFactory factory = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  const ServiceConfig& config() const { return config_; }

  nlohmann::json create_project(const std::string& name);
  nlohmann::json list_projects() const;
  nlohmann::json get_project(const std::string& project_id) const;

  /// Replaces the project's frame set with `files` (name, bytes), ordered by
  /// name. 409 once a job exists for the project.
  nlohmann::json put_frames(const std::string& project_id,
                            const std::vector<std::pair<std::string, std::string>>& files);
  /// Same, reading frame_NNNN.* files from a directory on the server.
  nlohmann::json put_frames_from_directory(const std::string& project_id, const std::filesystem::path& dir);
  /// PNG bytes of frame `index` (chronological).
  std::string frame_png(const std::string& project_id, int index) const;

  /// 422 with the annotation error as detail when the document is invalid
  /// (against the frames when the project has them).
  nlohmann::json put_annotation(const std::string& project_id, const nlohmann::json& doc);
  nlohmann::json get_annotation(const std::string& project_id) const;

  /// Body: {"backend": "baseline"|"remote", "params": {...}, "remote_url"?}.
  /// Returns the queued job at once.
  nlohmann::json start_job(const std::string& project_id, const nlohmann::json& body);
  nlohmann::json list_jobs(const std::string& project_id) const;
  nlohmann::json job_status(const std::string& job_id) const;
  nlohmann::json cancel_job(const std::string& job_id);

  /// Manifest artifacts of a finished job.
  nlohmann::json list_artifacts(const std::string& job_id) const;
  /// Absolute path of an artifact file; 404 for anything outside the report.
  std::filesystem::path artifact_path(const std::string& job_id, const std::string& relative) const;

  /// Runs the oldest queued job on the calling thread. False when the queue
  /// is empty.
  bool run_next_job();
  /// Blocks until no job is queued or running, or `timeout` passes.
  bool wait_idle(std::chrono::milliseconds timeout);

 private:
  struct FrameRef {
    std::string name;
    std::string sha256;
    std::string ext;
  };
  struct Project {
    std::string id;
    std::string name;
    std::string created_at;
    std::vector<FrameRef> frames;
    int width = 0, height = 0, bit_depth = 8;
    std::optional<nlohmann::json> annotation;
    std::vector<std::string> jobs;
    mutable std::mutex mutex;  // serializes mutations of this project
  };
  struct Job {
    std::string id;
    std::string project_id;
    std::string backend;
    std::string remote_url;
    nlohmann::json params;
    nlohmann::json annotation;  // snapshot taken when the job was created
    std::string created_at;
    JobState state = JobState::queued;
    std::vector<JobState> transitions{JobState::queued};
    int frames_done = 0, frames_total = 0;
    std::vector<nlohmann::json> log;
    nlohmann::json error;
    std::stop_source stop;
    mutable std::mutex mutex;
  };

  std::shared_ptr<Project> project(const std::string& id) const;
  std::shared_ptr<Job> job(const std::string& id) const;
  nlohmann::json project_json(const Project& p) const;
  nlohmann::json job_json(const Job& j) const;
  void save_project(const Project& p) const;
  void save_job(const Job& j) const;
  void load_state();
  void set_state(Job& j, JobState to);
  void append_log(Job& j, std::string_view line);
  nlohmann::json store_frames(Project& p, std::vector<std::pair<std::string, std::string>> files);
  void execute(const std::shared_ptr<Job>& j);
  void worker_loop(std::stop_token stop);
  std::filesystem::path job_dir(const std::string& id) const;

  ServiceConfig config_;
  BackendFactory factory_;
  mutable std::mutex mutex_;  // guards the maps and the queue
  std::condition_variable_any cv_;
  std::map<std::string, std::shared_ptr<Project>> projects_;
  std::map<std::string, std::shared_ptr<Job>> jobs_;
  std::deque<std::string> queue_;
  int running_ = 0;
  std::vector<std::jthread> workers_;
};

/// Mounts the /api/v1 routes of `service` on `server`.
void mount_routes(httplib::Server& server, Service& service);

}  // namespace cystrack
