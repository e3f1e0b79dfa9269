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

#include "cystrack/service.hpp"

#include "cystrack/image_io.hpp"
#include "cystrack/protocol.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <random>

namespace cystrack {

namespace fs = std::filesystem;
using nlohmann::json;

json ServiceError::body() const {
  json e = {{"code", code_}, {"message", what()}};
  if (!detail_.empty()) e["detail"] = detail_;
  return {{"error", e}};
}

const char* to_string(JobState s) {
  switch (s) {
    case JobState::queued: return "queued";
    case JobState::running: return "running";
    case JobState::done: return "done";
    case JobState::failed: return "failed";
    case JobState::cancelled: return "cancelled";
  }
  return "failed";
}

std::optional<JobState> job_state_from_string(std::string_view s) {
  for (JobState st : {JobState::queued, JobState::running, JobState::done, JobState::failed, JobState::cancelled})
    if (s == to_string(st)) return st;
  return std::nullopt;
}

bool is_allowed_transition(JobState from, JobState to) {
  switch (from) {
    case JobState::queued: return to == JobState::running || to == JobState::cancelled;
    case JobState::running: return to == JobState::done || to == JobState::failed || to == JobState::cancelled;
    default: return false;
  }
}

ServiceConfig config_from_env(ServiceConfig base) {
  if (const char* v = std::getenv("DATA_DIR"); v && *v) base.data_dir = v;
  if (const char* v = std::getenv("AUTH_TOKEN"); v && *v) base.auth_token = v;
  if (const char* v = std::getenv("REMOTE_SEGMENTER_URL"); v && *v) base.remote_url = v;
  return base;
}

namespace {

std::string now_iso() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[40];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  char out[48];
  std::snprintf(out, sizeof out, "%s.%03dZ", buf, int(ms));
  return out;
}

std::string new_id(char prefix) {
  static std::mutex m;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(m);
  char buf[24];
  std::snprintf(buf, sizeof buf, "%c%012llx", prefix, static_cast<unsigned long long>(rng() & 0xffffffffffffULL));
  return buf;
}

[[noreturn]] void not_found(const std::string& what, const std::string& id) {
  throw ServiceError(404, "NotFound", what + " '" + id + "' not found");
}

json error_detail(const Error& e) {
  return {{"code", e.code()}, {"category", to_string(e.category())}, {"entity", e.entity()}, {"message", e.what()}};
}

std::unique_ptr<SegmenterBackend> default_factory(const std::string& backend, const std::string& url) {
  if (backend == "baseline") return std::make_unique<BaselineBackend>();
  if (backend == "remote") return std::make_unique<RemoteBackend>(url);
  throw ServiceError(400, "UnknownBackend", "unknown backend '" + backend + "'");
}

json read_json(const fs::path& p) {
  const std::vector<std::uint8_t> bytes = io::read_file(p);
  return json::parse(bytes.begin(), bytes.end());
}

// Writes through a temporary file so readers never see half a document.
void write_json_atomic(const fs::path& p, const json& doc) {
  const fs::path tmp = p.string() + ".tmp";
  io::write_file(tmp, doc.dump(2) + "\n");
  fs::rename(tmp, p);
}

}  // namespace

Service::Service(ServiceConfig config, BackendFactory factory)
    : config_(std::move(config)), factory_(factory ? std::move(factory) : BackendFactory(default_factory)) {
  for (const char* sub : {"store", "projects", "jobs"}) fs::create_directories(config_.data_dir / sub);
  load_state();
  for (int i = 0; i < config_.workers; ++i)
    workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
}

Service::~Service() {
  {
    std::lock_guard lock(mutex_);
    for (auto& [id, j] : jobs_) {
      std::lock_guard jl(j->mutex);
      if (j->state == JobState::running) j->stop.request_stop();
    }
  }
  for (std::jthread& w : workers_) w.request_stop();
  cv_.notify_all();
  workers_.clear();
}

std::shared_ptr<Service::Project> Service::project(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = projects_.find(id);
  if (it == projects_.end()) not_found("project", id);
  return it->second;
}

std::shared_ptr<Service::Job> Service::job(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = jobs_.find(id);
  if (it == jobs_.end()) not_found("job", id);
  return it->second;
}

fs::path Service::job_dir(const std::string& id) const { return config_.data_dir / "jobs" / id; }

json Service::project_json(const Project& p) const {
  json frames = json::array();
  for (const FrameRef& f : p.frames) frames.push_back({{"name", f.name}, {"sha256", f.sha256}});
  return {{"project_id", p.id},
          {"name", p.name},
          {"created_at", p.created_at},
          {"frame_count", p.frames.size()},
          {"width", p.width},
          {"height", p.height},
          {"bit_depth", p.bit_depth},
          {"frames", frames},
          {"frames_locked", !p.jobs.empty()},
          {"has_annotation", p.annotation.has_value()},
          {"jobs", p.jobs}};
}

json Service::job_json(const Job& j) const {
  json transitions = json::array();
  for (JobState s : j.transitions) transitions.push_back(to_string(s));
  json out = {{"job_id", j.id},
              {"project_id", j.project_id},
              {"state", to_string(j.state)},
              {"transitions", transitions},
              {"backend", j.backend},
              {"params", j.params},
              {"created_at", j.created_at},
              {"progress", {{"done", j.frames_done}, {"total", j.frames_total}}},
              {"log", j.log},
              {"error", j.error},
              {"report", j.state == JobState::done ? json("/api/v1/jobs/" + j.id + "/artifacts") : json(nullptr)}};
  if (!j.remote_url.empty()) out["remote_url"] = j.remote_url;
  return out;
}

void Service::save_project(const Project& p) const {
  const fs::path dir = config_.data_dir / "projects" / p.id;
  fs::create_directories(dir);
  json doc = project_json(p);
  json frames = json::array();
  for (const FrameRef& f : p.frames) frames.push_back({{"name", f.name}, {"sha256", f.sha256}, {"ext", f.ext}});
  doc["frames"] = frames;
  write_json_atomic(dir / "project.json", doc);
  if (p.annotation) write_json_atomic(dir / "annotation.json", *p.annotation);
}

void Service::save_job(const Job& j) const {
  fs::create_directories(job_dir(j.id));
  write_json_atomic(job_dir(j.id) / "job.json", job_json(j));
}

void Service::load_state() {
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(config_.data_dir / "projects", ec)) {
    try {
      const json doc = read_json(e.path() / "project.json");
      auto p = std::make_shared<Project>();
      p->id = doc.at("project_id");
      p->name = doc.value("name", "");
      p->created_at = doc.value("created_at", "");
      p->width = doc.value("width", 0);
      p->height = doc.value("height", 0);
      p->bit_depth = doc.value("bit_depth", 8);
      for (const json& f : doc.at("frames")) p->frames.push_back({f.at("name"), f.at("sha256"), f.value("ext", "png")});
      p->jobs = doc.value("jobs", std::vector<std::string>{});
      if (fs::is_regular_file(e.path() / "annotation.json")) p->annotation = read_json(e.path() / "annotation.json");
      projects_[p->id] = p;
    } catch (const std::exception& ex) {
      spdlog::warn("skipping unreadable project {}: {}", e.path().string(), ex.what());
    }
  }
  std::vector<std::shared_ptr<Job>> requeue;
  for (const auto& e : fs::directory_iterator(config_.data_dir / "jobs", ec)) {
    try {
      const json doc = read_json(e.path() / "job.json");
      auto j = std::make_shared<Job>();
      j->id = doc.at("job_id");
      j->project_id = doc.at("project_id");
      j->backend = doc.at("backend");
      j->remote_url = doc.value("remote_url", "");
      j->params = doc.at("params");
      j->annotation = read_json(e.path() / "annotation.json");
      j->created_at = doc.value("created_at", "");
      j->state = job_state_from_string(doc.at("state").get<std::string>()).value_or(JobState::failed);
      j->transitions.clear();
      for (const json& s : doc.at("transitions"))
        j->transitions.push_back(job_state_from_string(s.get<std::string>()).value_or(JobState::failed));
      j->frames_done = doc.at("progress").value("done", 0);
      j->frames_total = doc.at("progress").value("total", 0);
      j->log = doc.value("log", std::vector<json>{});
      j->error = doc.value("error", json());
      if (j->state == JobState::running) {
        set_state(*j, JobState::failed);
        j->error = {{"code", "Interrupted"}, {"message", "service stopped while the job was running"}};
        save_job(*j);
      }
      if (j->state == JobState::queued) requeue.push_back(j);
      jobs_[j->id] = j;
    } catch (const std::exception& ex) {
      spdlog::warn("skipping unreadable job {}: {}", e.path().string(), ex.what());
    }
  }
  std::sort(requeue.begin(), requeue.end(), [](const auto& a, const auto& b) {
    return std::tie(a->created_at, a->id) < std::tie(b->created_at, b->id);
  });
  for (const auto& j : requeue) queue_.push_back(j->id);
}

json Service::create_project(const std::string& name) {
  auto p = std::make_shared<Project>();
  p->id = new_id('p');
  p->name = name;
  p->created_at = now_iso();
  save_project(*p);
  std::lock_guard lock(mutex_);
  projects_[p->id] = p;
  return project_json(*p);
}

json Service::list_projects() const {
  std::vector<std::shared_ptr<Project>> all;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, p] : projects_) all.push_back(p);
  }
  json out = json::array();
  for (const auto& p : all) {
    std::lock_guard pl(p->mutex);
    out.push_back(project_json(*p));
  }
  return {{"projects", out}};
}

json Service::get_project(const std::string& project_id) const {
  const auto p = project(project_id);
  std::lock_guard pl(p->mutex);
  return project_json(*p);
}

json Service::store_frames(Project& p, std::vector<std::pair<std::string, std::string>> files) {
  if (!p.jobs.empty())
    throw ServiceError(409, "FramesLocked", "frames of project '" + p.id + "' are immutable once a job has been started");
  if (files.size() < 2) throw ServiceError(400, "BadFrames", "a frame set needs at least 2 frames");
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

  std::vector<FrameRef> refs;
  int width = 0, height = 0, depth = 0;
  for (const auto& [name, bytes] : files) {
    if (!io::is_frame_file_name(name))
      throw ServiceError(400, "BadFrameName", "frame files must be named frame_NNNN.png/.tif, got '" + name + "'");
    std::string ext = fs::path(name).extension().string().substr(1);
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return char(std::tolower(c)); });
    const std::span<const std::uint8_t> data(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size());
    const std::string sha = io::sha256_hex(data);
    const fs::path stored = config_.data_dir / "store" / (sha + "." + ext);
    if (!fs::exists(stored)) {
      const fs::path tmp = stored.string() + "." + new_id('t') + ".tmp";
      io::write_file(tmp, data);
      fs::rename(tmp, stored);
    }
    io::GrayImage img;
    try {
      img = io::read_gray(stored);
    } catch (const Error& e) {
      throw ServiceError(400, "BadFrames", "cannot decode frame '" + name + "': " + e.what(), error_detail(e));
    }
    if (refs.empty()) {
      width = int(img.pixels.cols());
      height = int(img.pixels.rows());
      depth = img.bit_depth;
    } else if (img.pixels.cols() != width || img.pixels.rows() != height || img.bit_depth != depth) {
      throw ServiceError(400, "BadFrames", "frame '" + name + "' differs in size or bit depth from the first frame");
    }
    refs.push_back({name, sha, ext});
  }
  p.frames = std::move(refs);
  p.width = width;
  p.height = height;
  p.bit_depth = depth;
  save_project(p);
  return project_json(p);
}

json Service::put_frames(const std::string& project_id, const std::vector<std::pair<std::string, std::string>>& files) {
  const auto p = project(project_id);
  std::lock_guard pl(p->mutex);
  return store_frames(*p, files);
}

json Service::put_frames_from_directory(const std::string& project_id, const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ServiceError(400, "BadFrames", "not a directory: " + dir.string());
  std::vector<std::pair<std::string, std::string>> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (!e.is_regular_file() || !io::is_frame_file_name(name)) continue;
    const std::vector<std::uint8_t> bytes = io::read_file(e.path());
    files.emplace_back(name, std::string(bytes.begin(), bytes.end()));
  }
  return put_frames(project_id, files);
}

std::string Service::frame_png(const std::string& project_id, int index) const {
  const auto p = project(project_id);
  FrameRef ref;
  int depth = 8;
  {
    std::lock_guard pl(p->mutex);
    if (index < 0 || index >= int(p->frames.size())) not_found("frame", std::to_string(index));
    ref = p->frames[std::size_t(index)];
    depth = p->bit_depth;
  }
  const fs::path stored = config_.data_dir / "store" / (ref.sha256 + "." + ref.ext);
  std::vector<std::uint8_t> bytes;
  if (ref.ext == "png") {
    bytes = io::read_file(stored);
  } else {
    bytes = io::encode_png(io::read_gray(stored).pixels, depth);
  }
  return std::string(bytes.begin(), bytes.end());
}

json Service::put_annotation(const std::string& project_id, const json& doc) {
  const auto p = project(project_id);
  std::lock_guard pl(p->mutex);
  AnnotationSession session;
  try {
    session = annotation_from_json(doc);
    if (p->frames.empty())
      validate(session);
    else
      validate(session, p->width, p->height, int(p->frames.size()));
  } catch (const Error& e) {
    throw ServiceError(422, "InvalidAnnotation", e.what(), error_detail(e));
  }
  p->annotation = to_json(session);
  save_project(*p);
  return *p->annotation;
}

json Service::get_annotation(const std::string& project_id) const {
  const auto p = project(project_id);
  std::lock_guard pl(p->mutex);
  if (!p->annotation) not_found("annotation of project", project_id);
  return *p->annotation;
}

json Service::start_job(const std::string& project_id, const json& body) {
  if (!body.is_object()) throw ServiceError(400, "Malformed", "job request must be a JSON object");
  const auto p = project(project_id);
  std::lock_guard pl(p->mutex);

  if (p->frames.empty()) throw ServiceError(422, "NoFrames", "project '" + project_id + "' has no frames");
  if (!p->annotation) throw ServiceError(422, "NoAnnotation", "project '" + project_id + "' has no annotation");
  try {
    validate(annotation_from_json(*p->annotation), p->width, p->height, int(p->frames.size()));
  } catch (const Error& e) {
    throw ServiceError(422, "InvalidAnnotation", e.what(), error_detail(e));
  }

  auto j = std::make_shared<Job>();
  j->id = new_id('j');
  j->project_id = project_id;
  j->created_at = now_iso();
  j->backend = body.value("backend", "baseline");
  if (j->backend != "baseline" && j->backend != "remote")
    throw ServiceError(400, "UnknownBackend", "backend must be 'baseline' or 'remote'");
  try {
    j->params = to_json(params_from_json(body.value("params", json::object())));
  } catch (const Error& e) {
    throw ServiceError(400, "BadParams", e.what(), error_detail(e));
  }
  if (j->backend == "remote") {
    j->remote_url = body.value("remote_url", config_.remote_url);
    if (j->remote_url.empty())
      throw ServiceError(400, "RemoteNotConfigured", "backend 'remote' needs REMOTE_SEGMENTER_URL or a remote_url");
    const std::unique_ptr<SegmenterBackend> b = factory_(j->backend, j->remote_url);
    if (const auto* r = dynamic_cast<const RemoteBackend*>(b.get()); r && !r->reachable())
      throw ServiceError(503, "BackendUnreachable", "segmenter at " + j->remote_url + " is unreachable",
                         {{"url", j->remote_url}});
  }
  j->frames_total = int(p->frames.size());
  j->annotation = *p->annotation;
  fs::create_directories(job_dir(j->id));
  write_json_atomic(job_dir(j->id) / "annotation.json", j->annotation);
  append_log(*j, "queued");
  p->jobs.push_back(j->id);
  save_project(*p);
  save_job(*j);
  {
    std::lock_guard lock(mutex_);
    jobs_[j->id] = j;
    queue_.push_back(j->id);
  }
  cv_.notify_all();
  std::lock_guard jl(j->mutex);
  return job_json(*j);
}

json Service::list_jobs(const std::string& project_id) const {
  const auto p = project(project_id);
  std::vector<std::string> ids;
  {
    std::lock_guard pl(p->mutex);
    ids = p->jobs;
  }
  json out = json::array();
  for (const std::string& id : ids) out.push_back(job_status(id));
  return {{"jobs", out}};
}

json Service::job_status(const std::string& job_id) const {
  const auto j = job(job_id);
  std::lock_guard jl(j->mutex);
  return job_json(*j);
}

void Service::set_state(Job& j, JobState to) {
  if (!is_allowed_transition(j.state, to))
    throw std::logic_error(std::string("illegal job transition ") + to_string(j.state) + " -> " + to_string(to));
  j.state = to;
  j.transitions.push_back(to);
}

void Service::append_log(Job& j, std::string_view line) {
  j.log.push_back({{"time", now_iso()}, {"line", std::string(line)}});
}

json Service::cancel_job(const std::string& job_id) {
  const auto j = job(job_id);
  {
    std::lock_guard lock(mutex_);
    std::lock_guard jl(j->mutex);
    if (j->state == JobState::queued) {
      queue_.erase(std::remove(queue_.begin(), queue_.end(), job_id), queue_.end());
      set_state(*j, JobState::cancelled);
      append_log(*j, "cancelled before it started");
      save_job(*j);
    } else if (j->state == JobState::running) {
      j->stop.request_stop();
      append_log(*j, "cancellation requested");
    } else {
      throw ServiceError(409, "JobFinished", "job '" + job_id + "' already " + to_string(j->state));
    }
  }
  cv_.notify_all();
  return job_status(job_id);
}

void Service::execute(const std::shared_ptr<Job>& j) {
  PipelineParams params;
  std::string backend_name, remote_url;
  json annotation;
  {
    std::lock_guard jl(j->mutex);
    if (j->state != JobState::queued) return;
    set_state(*j, JobState::running);
    append_log(*j, "running");
    save_job(*j);
    params = params_from_json(j->params);
    backend_name = j->backend;
    remote_url = j->remote_url;
    annotation = j->annotation;
  }
  const auto p = project(j->project_id);

  auto finish = [&](JobState st, const json& error, const std::string& line) {
    std::lock_guard jl(j->mutex);
    set_state(*j, st);
    j->error = error;
    append_log(*j, line);
    save_job(*j);
  };

  try {
    PipelineInputs inputs;
    inputs.annotation = annotation_from_json(annotation);
    {
      std::lock_guard pl(p->mutex);
      json frames = json::array();
      for (const FrameRef& f : p->frames) {
        io::GrayImage img = io::read_gray(config_.data_dir / "store" / (f.sha256 + "." + f.ext));
        inputs.frames.frames.push_back(std::move(img.pixels));
        inputs.frames.source_ids.push_back(f.name);
        inputs.frames.bit_depth = img.bit_depth;
        frames.push_back({{"name", f.name}, {"sha256", f.sha256}});
      }
      inputs.provenance = {{"frames", frames}, {"annotation_sha256", io::sha256_hex(annotation.dump())}};
    }
    const std::unique_ptr<SegmenterBackend> backend = factory_(backend_name, remote_url);

    TrackControl control;
    control.stop = j->stop.get_token();
    control.on_progress = [&](int done, int total) {
      std::lock_guard jl(j->mutex);
      j->frames_done = done;
      j->frames_total = total;
    };
    control.on_log = [&](std::string_view line) {
      std::lock_guard jl(j->mutex);
      append_log(*j, line);
    };
    run_pipeline(inputs, *backend, params, job_dir(j->id) / "report", control);
    finish(JobState::done, nullptr, "done");
  } catch (const TrackingError& e) {
    if (e.code() == "Cancelled")
      finish(JobState::cancelled, nullptr, "cancelled");
    else
      finish(JobState::failed, error_detail(e), std::string("failed: ") + e.what());
  } catch (const Error& e) {
    finish(JobState::failed, error_detail(e), std::string("failed: ") + e.what());
  } catch (const std::exception& e) {
    finish(JobState::failed, {{"code", "Internal"}, {"category", "internal"}, {"message", e.what()}},
           std::string("failed: ") + e.what());
  }
}

bool Service::run_next_job() {
  std::shared_ptr<Job> next;
  {
    std::lock_guard lock(mutex_);
    if (queue_.empty()) return false;
    next = jobs_.at(queue_.front());
    queue_.pop_front();
    ++running_;
  }
  execute(next);
  {
    std::lock_guard lock(mutex_);
    --running_;
  }
  cv_.notify_all();
  return true;
}

void Service::worker_loop(std::stop_token stop) {
  while (!stop.stop_requested()) {
    {
      std::unique_lock lock(mutex_);
      if (!cv_.wait(lock, stop, [this] { return !queue_.empty(); })) return;
    }
    run_next_job();
  }
}

bool Service::wait_idle(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  return cv_.wait_for(lock, timeout, [this] { return queue_.empty() && running_ == 0; });
}

json Service::list_artifacts(const std::string& job_id) const {
  const auto j = job(job_id);
  {
    std::lock_guard jl(j->mutex);
    if (j->state != JobState::done)
      throw ServiceError(409, "NoReport", "job '" + job_id + "' is " + to_string(j->state) + ", not done");
  }
  const json manifest = read_json(job_dir(job_id) / "report" / "manifest.json");
  return {{"job_id", job_id}, {"artifacts", manifest.at("artifacts")}, {"manifest", manifest}};
}

fs::path Service::artifact_path(const std::string& job_id, const std::string& relative) const {
  const auto j = job(job_id);
  {
    std::lock_guard jl(j->mutex);
    if (j->state != JobState::done)
      throw ServiceError(409, "NoReport", "job '" + job_id + "' is " + to_string(j->state) + ", not done");
  }
  const fs::path rel = fs::path(relative).lexically_normal();
  if (rel.empty() || rel.is_absolute() || *rel.begin() == "..") not_found("artifact", relative);
  const fs::path full = job_dir(job_id) / "report" / rel;
  if (!fs::is_regular_file(full)) not_found("artifact", relative);
  return full;
}

}  // namespace cystrack
