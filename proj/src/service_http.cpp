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

#include "cystrack/image_io.hpp"
#include "cystrack/protocol.hpp"
#include "cystrack/service.hpp"
#include "cystrack/version.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace cystrack {

using nlohmann::json;

namespace {

constexpr const char* kJson = "application/json";

void send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), kJson);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ServiceError(400, "Malformed", std::string("request body is not JSON: ") + e.what());
  }
}

// Runs `fn` and maps failures to status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    send(res, e.status(), e.body());
  } catch (const Error& e) {
    const int status = e.category() == ErrorCategory::input ? 400 : 500;
    send(res, status,
         {{"error", {{"code", e.code()}, {"message", e.what()}, {"entity", e.entity()}}}});
  } catch (const std::exception& e) {
    spdlog::error("unhandled error: {}", e.what());
    send(res, 500, {{"error", {{"code", "Internal"}, {"message", e.what()}}}});
  }
}

std::string content_type(const std::string& path) {
  const auto ends = [&](std::string_view s) { return path.size() >= s.size() && path.ends_with(s); };
  if (ends(".csv")) return "text/csv; charset=utf-8";
  if (ends(".json")) return kJson;
  if (ends(".svg")) return "image/svg+xml";
  if (ends(".apng")) return "image/apng";
  if (ends(".png")) return "image/png";
  return "application/octet-stream";
}

}  // namespace

void mount_routes(httplib::Server& srv, Service& svc) {
  const std::string token = svc.config().auth_token;
  srv.set_pre_routing_handler([token](const httplib::Request& req, httplib::Response& res) {
    if (token.empty() || req.path == "/api/v1/health" || !req.path.starts_with("/api/v1")) {
      return httplib::Server::HandlerResponse::Unhandled;
    }
    if (req.get_header_value("Authorization") != "Bearer " + token) {
      send(res, 401, {{"error", {{"code", "Unauthorized"}, {"message", "missing or wrong bearer token"}}}});
      return httplib::Server::HandlerResponse::Handled;
    }
    return httplib::Server::HandlerResponse::Unhandled;
  });
  srv.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
  });

  srv.Get("/api/v1/health", [](const httplib::Request&, httplib::Response& res) {
    send(res, 200, {{"status", "ok"}, {"version", version()}});
  });

  srv.Post("/api/v1/projects", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      send(res, 201, svc.create_project(body.value("name", "")));
    });
  });
  srv.Get("/api/v1/projects", [&svc](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, svc.list_projects()); });
  });
  srv.Get(R"(/api/v1/projects/([\w-]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, svc.get_project(req.matches[1])); });
  });

  // Multipart upload of frame files, or {"directory": "<server path>"}.
  srv.Post(R"(/api/v1/projects/([\w-]+)/frames)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      if (req.is_multipart_form_data()) {
        std::vector<std::pair<std::string, std::string>> files;
        for (const auto& [field, f] : req.files) files.emplace_back(f.filename.empty() ? f.name : f.filename, f.content);
        send(res, 200, svc.put_frames(req.matches[1], files));
        return;
      }
      const json body = parse_body(req);
      if (!body.contains("directory") || !body["directory"].is_string())
        throw ServiceError(400, "Malformed", "send multipart frame files or {\"directory\": path}");
      send(res, 200, svc.put_frames_from_directory(req.matches[1], body["directory"].get<std::string>()));
    });
  });
  srv.Get(R"(/api/v1/projects/([\w-]+)/frames)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json p = svc.get_project(req.matches[1]);
      send(res, 200, {{"frames", p.at("frames")}, {"width", p.at("width")}, {"height", p.at("height")}});
    });
  });
  srv.Get(R"(/api/v1/projects/([\w-]+)/frames/(\d+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      res.set_content(svc.frame_png(req.matches[1], std::stoi(req.matches[2])), "image/png");
    });
  });

  srv.Put(R"(/api/v1/projects/([\w-]+)/annotation)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, svc.put_annotation(req.matches[1], parse_body(req))); });
  });
  srv.Get(R"(/api/v1/projects/([\w-]+)/annotation)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, svc.get_annotation(req.matches[1])); });
  });

  srv.Post(R"(/api/v1/projects/([\w-]+)/jobs)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 202, svc.start_job(req.matches[1], parse_body(req))); });
  });
  srv.Get(R"(/api/v1/projects/([\w-]+)/jobs)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, svc.list_jobs(req.matches[1])); });
  });
  srv.Get(R"(/api/v1/jobs/([\w-]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, svc.job_status(req.matches[1])); });
  });
  srv.Post(R"(/api/v1/jobs/([\w-]+)/cancel)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, svc.cancel_job(req.matches[1])); });
  });
  srv.Get(R"(/api/v1/jobs/([\w-]+)/artifacts)", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { send(res, 200, svc.list_artifacts(req.matches[1])); });
  });
  srv.Get(R"(/api/v1/jobs/([\w-]+)/artifacts/(.+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string rel = req.matches[2];
      const std::vector<std::uint8_t> bytes = io::read_file(svc.artifact_path(req.matches[1], rel));
      res.set_content(std::string(bytes.begin(), bytes.end()), content_type(rel));
    });
  });

  // Reference segmenter: the wire protocol served by the baseline tracker.
  srv.Post("/api/v1/segment", [](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      BaselineBackend baseline;
      try {
        send(res, 200, handle_segment_request(parse_body(req), baseline));
      } catch (const TrackingError& e) {
        const int status = e.code() == "ProtocolError" ? 400 : 422;
        throw ServiceError(status, e.code(), e.what(), {{"entity", e.entity()}});
      } catch (const Error& e) {
        throw ServiceError(400, e.code(), e.what(), {{"entity", e.entity()}});
      }
    });
  });
}

}  // namespace cystrack
