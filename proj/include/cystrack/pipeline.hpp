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

#include "cystrack/annotation.hpp"
#include "cystrack/mask.hpp"
#include "cystrack/metrics.hpp"
#include "cystrack/report.hpp"
#include "cystrack/tracking.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace cystrack {

/// Tunables of a run. The params file is a JSON object with any of these
/// keys; absent keys keep the defaults shown here.
struct PipelineParams {
  TrackerParams tracker;                                 // iou_floor, min_area_px, search_margin, min_separability
  Quality quality = Quality::full;                       // "quality"
  ComponentPolicy component_policy = ComponentPolicy::largest;  // "component_policy": "largest" | "merge"
};

/// Overlays `doc` onto `base`. Throws Error(input, "BadParams") on unknown
/// keys or out-of-range values.
PipelineParams params_from_json(const nlohmann::json& doc, PipelineParams base = {});
nlohmann::json to_json(const PipelineParams& params);
PipelineParams load_params(const std::filesystem::path& path, PipelineParams base = {});

/// Frames and annotation of one run, with content hashes for the manifest.
struct PipelineInputs {
  FrameSequence frames;
  AnnotationSession annotation;
  nlohmann::json provenance = nlohmann::json::object();
};

/// Reads a frame directory and an annotation document. Throws input-category
/// errors.
PipelineInputs load_inputs(const std::filesystem::path& frames_dir, const std::filesystem::path& annotation);

struct RunResult {
  TrackResult track;
  MetricsBundle metrics;
  nlohmann::json manifest;
};

/// UTC timestamp for manifests; honours SOURCE_DATE_EPOCH when set.
std::string report_timestamp();

/// validate -> track -> metrics -> report. The report is assembled in a
/// sibling staging directory and renamed into `out_dir` only on success, so a
/// failed run leaves no partial output. An existing `out_dir` is replaced
/// only when it is empty or holds a previous report (a manifest.json);
/// otherwise Error(output, "OutputExists") is thrown.
RunResult run_pipeline(const PipelineInputs& inputs, SegmenterBackend& backend, const PipelineParams& params,
                       const std::filesystem::path& out_dir, const TrackControl& control = {});

}  // namespace cystrack
