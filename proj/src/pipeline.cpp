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

#include "cystrack/pipeline.hpp"

#include "cystrack/image_io.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <random>

namespace cystrack {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void bad_params(const std::string& key, const std::string& message) {
  throw Error(ErrorCategory::input, "BadParams", key, message);
}

double number(const json& v, const std::string& key) {
  if (!v.is_number()) bad_params(key, "'" + key + "' must be a number");
  return v.get<double>();
}

}  // namespace

PipelineParams params_from_json(const json& doc, PipelineParams p) {
  if (!doc.is_object()) bad_params("", "params must be a JSON object");
  for (const auto& [key, v] : doc.items()) {
    if (key == "iou_floor") {
      p.tracker.iou_floor = number(v, key);
      if (p.tracker.iou_floor < 0.0 || p.tracker.iou_floor > 1.0) bad_params(key, "iou_floor must lie in [0, 1]");
    } else if (key == "min_area_px") {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 1) bad_params(key, "min_area_px must be a positive integer");
      p.tracker.min_area_px = v.get<int>();
    } else if (key == "search_margin") {
      p.tracker.search_margin = number(v, key);
      if (p.tracker.search_margin < 0.0) bad_params(key, "search_margin must be non-negative");
    } else if (key == "min_separability") {
      p.tracker.min_separability = number(v, key);
      if (p.tracker.min_separability < 0.0 || p.tracker.min_separability > 1.0)
        bad_params(key, "min_separability must lie in [0, 1]");
    } else if (key == "quality") {
      if (!v.is_string()) bad_params(key, "quality must be a string");
      p.quality = parse_quality(v.get<std::string>());
    } else if (key == "component_policy") {
      const std::string s = v.is_string() ? v.get<std::string>() : "";
      if (s == "largest") p.component_policy = ComponentPolicy::largest;
      else if (s == "merge") p.component_policy = ComponentPolicy::merge;
      else bad_params(key, "component_policy must be 'largest' or 'merge'");
    } else {
      bad_params(key, "unknown parameter '" + key + "'");
    }
  }
  return p;
}

json to_json(const PipelineParams& p) {
  return {{"iou_floor", p.tracker.iou_floor},
          {"min_area_px", p.tracker.min_area_px},
          {"search_margin", p.tracker.search_margin},
          {"min_separability", p.tracker.min_separability},
          {"quality", to_string(p.quality)},
          {"component_policy", p.component_policy == ComponentPolicy::merge ? "merge" : "largest"}};
}

PipelineParams load_params(const fs::path& path, PipelineParams base) {
  const std::vector<std::uint8_t> bytes = io::read_file(path);
  try {
    return params_from_json(json::parse(bytes.begin(), bytes.end()), base);
  } catch (const json::parse_error& e) {
    bad_params(path.string(), path.string() + ": " + e.what());
  }
}

PipelineInputs load_inputs(const fs::path& frames_dir, const fs::path& annotation) {
  PipelineInputs in;
  // Annotation first: a missing file should fail before any frame decoding.
  const std::vector<std::uint8_t> doc = io::read_file(annotation);
  json parsed;
  try {
    parsed = json::parse(doc.begin(), doc.end());
  } catch (const json::parse_error& e) {
    throw AnnotationError("Malformed", annotation.string(), annotation.string() + ": " + e.what());
  }
  in.annotation = annotation_from_json(parsed);
  in.frames = io::load_frame_directory(frames_dir);

  json frames = json::array();
  for (const std::string& name : in.frames.source_ids)
    frames.push_back({{"name", name}, {"sha256", io::sha256_hex(io::read_file(frames_dir / name))}});
  in.provenance = {{"frames", frames}, {"annotation_sha256", io::sha256_hex(doc)}};
  return in;
}

std::string report_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end && *end == '\0') t = std::time_t(v);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

fs::path staging_dir(const fs::path& out_dir) {
  std::random_device rd;
  const fs::path parent = out_dir.has_parent_path() ? out_dir.parent_path() : fs::path(".");
  return parent / fmt::format(".{}.partial-{:08x}", out_dir.filename().string(), rd());
}

void check_replaceable(const fs::path& out_dir) {
  std::error_code ec;
  if (!fs::exists(out_dir, ec)) return;
  if (!fs::is_directory(out_dir, ec))
    throw Error(ErrorCategory::output, "OutputExists", out_dir.string(), out_dir.string() + " exists and is not a directory");
  if (fs::is_empty(out_dir, ec) || fs::is_regular_file(out_dir / "manifest.json", ec)) return;
  throw Error(ErrorCategory::output, "OutputExists", out_dir.string(),
              out_dir.string() + " exists and does not hold a previous report; refusing to replace it");
}

}  // namespace

RunResult run_pipeline(const PipelineInputs& inputs, SegmenterBackend& backend, const PipelineParams& params,
                       const fs::path& out_dir, const TrackControl& control) {
  inputs.frames.check();
  const ValidatedSession session =
      validate(inputs.annotation, inputs.frames.width(), inputs.frames.height(), inputs.frames.size());
  control.log(fmt::format("{} organoids, {} cysts, {} frames", session.organoid_count(), session.cyst_count(),
                          inputs.frames.size()));
  check_replaceable(out_dir);

  RunResult result;
  control.log("tracking with backend '" + backend.name() + "'");
  result.track = track(inputs.frames, session, backend, params.tracker, control);
  control.checkpoint();

  result.metrics = compute_metrics(result.track, session, params.component_policy);

  const fs::path stage = staging_dir(out_dir);
  std::error_code ec;
  fs::create_directories(stage, ec);
  if (ec) throw IoError(ErrorCategory::output, stage.string(), "cannot create " + stage.string() + ": " + ec.message());
  try {
    ReportContext ctx;
    ctx.backend = backend.name();
    ctx.quality = params.quality;
    ctx.params = to_json(params);
    ctx.inputs = inputs.provenance;
    ctx.warnings = result.track.warnings;
    ctx.generated_at = report_timestamp();
    control.log("writing report");
    result.manifest = write_report(result.metrics, inputs.frames, result.track, ctx, stage);
    control.checkpoint();

    check_replaceable(out_dir);
    fs::remove_all(out_dir, ec);
    fs::rename(stage, out_dir, ec);
    if (ec) throw IoError(ErrorCategory::output, out_dir.string(), "cannot move report into " + out_dir.string() + ": " + ec.message());
  } catch (...) {
    fs::remove_all(stage, ec);
    throw;
  }
  control.log("report written to " + out_dir.string());
  return result;
}

}  // namespace cystrack
