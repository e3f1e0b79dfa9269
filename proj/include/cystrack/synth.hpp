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
#include "cystrack/tracking.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace cystrack {

/// One disk in a synthetic time-lapse. `center` and `radius` hold one entry
/// per frame; entries before `appear_frame` are ignored.
struct SynthObject {
  std::string cyst_id;
  std::string organoid_id;
  int appear_frame = 0;
  std::vector<Eigen::Vector2d> center;
  std::vector<double> radius;
  double contrast = 80.0;  // added to the background level; negative for dark disks
  bool operator==(const SynthObject&) const = default;
};

struct SynthOrganoid {
  std::string organoid_id;
  double anchor_x = 0.0;
  double anchor_y = 0.0;
  bool operator==(const SynthOrganoid&) const = default;
};

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  int width = 128;
  int height = 128;
  int frame_count = 7;
  int bit_depth = 8;
  double um_per_pixel = 1.0;
  double total_duration_hours = 144.0;
  double background_level = 60.0;
  double noise_sigma = 4.0;
  std::vector<SynthOrganoid> organoids;  // cyst-free organoids or explicit anchors
  std::vector<SynthObject> objects;
  bool operator==(const Scenario&) const = default;
};

/// Throws SynthError("OutOfBounds") if a disk leaves the frame, and
/// SynthError("InvalidScenario") for any other broken invariant.
void check(const Scenario& scenario);

/// Reads a scenario document. Per-frame paths may be given as explicit
/// lists or as {"start", "velocity"} / {"start", "slope"} linear laws in the
/// frame index.
Scenario scenario_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const Scenario& scenario);
Scenario load_scenario(const std::filesystem::path& path);

/// Ground-truth mask of a disk: pixels whose centre lies within `radius`.
BinaryMask rasterize_disk(int width, int height, const Eigen::Vector2d& center, double radius);

struct SynthOutput {
  FrameSequence frames;
  AnnotationSession session;
  TrackResult truth;  // chronological, one track per object in document order
};

/// Deterministic given the scenario (including its seed).
SynthOutput render(const Scenario& scenario);

/// Names of the built-in scenarios, in a fixed order.
std::vector<std::string> builtin_scenario_names();
/// Throws SynthError("UnknownScenario").
Scenario builtin_scenario(const std::string& name);

/// Writes `frames/frame_NNNN.png`, `annotation.json`, `ground_truth.json`
/// and `scenario.json` under `dir`.
void write_synth_output(const SynthOutput& out, const Scenario& scenario, const std::filesystem::path& dir);

nlohmann::json ground_truth_to_json(const TrackResult& truth, const AnnotationSession& session);

}  // namespace cystrack
