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

#include "cystrack/synth.hpp"

#include <utility>

namespace cystrack {

namespace {

// name, document
const std::pair<const char*, const char*> kBuiltins[] = {
    {"growth", R"({
  "name": "growth", "seed": 101, "width": 128, "height": 128, "frame_count": 7,
  "um_per_pixel": 1.0, "total_duration_hours": 144,
  "background": {"level": 60, "noise_sigma": 4},
  "objects": [
    {"cyst_id": "c1", "organoid_id": "o1", "appear_frame": 2,
     "center": [64, 64], "radius": {"start": 5, "slope": 2}, "contrast": 90}
  ]
})"},
    {"shrink_to_absent", R"({
  "name": "shrink_to_absent", "seed": 202, "width": 128, "height": 128, "frame_count": 7,
  "um_per_pixel": 1.0, "total_duration_hours": 144,
  "background": {"level": 140, "noise_sigma": 4},
  "objects": [
    {"cyst_id": "c1", "organoid_id": "o1", "appear_frame": 2,
     "center": [60, 70], "radius": [0, 0, 6, 9, 12, 15, 18], "contrast": -70}
  ]
})"},
    {"late_formation", R"({
  "name": "late_formation", "seed": 303, "width": 128, "height": 128, "frame_count": 7,
  "um_per_pixel": 1.0, "total_duration_hours": 144,
  "background": {"level": 60, "noise_sigma": 4},
  "objects": [
    {"cyst_id": "early", "organoid_id": "o1", "appear_frame": 0,
     "center": [36, 40], "radius": {"start": 8, "slope": 1}, "contrast": 80},
    {"cyst_id": "late", "organoid_id": "o2", "appear_frame": 5,
     "center": [88, 86], "radius": [0, 0, 0, 0, 0, 10, 13], "contrast": 80}
  ]
})"},
    {"two_adjacent", R"({
  "name": "two_adjacent", "seed": 404, "width": 128, "height": 128, "frame_count": 7,
  "um_per_pixel": 1.0, "total_duration_hours": 144,
  "background": {"level": 60, "noise_sigma": 4},
  "organoids": [{"organoid_id": "o1", "anchor": [64, 64]}],
  "objects": [
    {"cyst_id": "left", "organoid_id": "o1", "appear_frame": 0,
     "center": [44, 64], "radius": {"start": 8, "slope": 1.5}, "contrast": 85},
    {"cyst_id": "right", "organoid_id": "o1", "appear_frame": 1,
     "center": [84, 64], "radius": {"start": 7, "slope": 1.5}, "contrast": 85}
  ]
})"},
    {"drift", R"({
  "name": "drift", "seed": 505, "width": 128, "height": 128, "frame_count": 7,
  "um_per_pixel": 1.0, "total_duration_hours": 144,
  "background": {"level": 60, "noise_sigma": 4},
  "objects": [
    {"cyst_id": "c1", "organoid_id": "o1", "appear_frame": 0,
     "center": {"start": [34, 40], "velocity": [4, 3]}, "radius": {"start": 10, "slope": 1}, "contrast": 80}
  ]
})"},
    {"static", R"({
  "name": "static", "seed": 606, "width": 128, "height": 128, "frame_count": 7,
  "um_per_pixel": 1.0, "total_duration_hours": 144,
  "background": {"level": 60, "noise_sigma": 0},
  "objects": [
    {"cyst_id": "c1", "organoid_id": "o1", "appear_frame": 0,
     "center": [64, 64], "radius": 14, "contrast": 80}
  ]
})"},
    {"demo", R"({
  "name": "demo", "seed": 2026, "width": 192, "height": 192, "frame_count": 7,
  "um_per_pixel": 0.65, "total_duration_hours": 144,
  "background": {"level": 70, "noise_sigma": 4},
  "organoids": [
    {"organoid_id": "org-1", "anchor": [48, 48]},
    {"organoid_id": "org-2", "anchor": [144, 48]},
    {"organoid_id": "org-3", "anchor": [48, 144]},
    {"organoid_id": "org-4", "anchor": [144, 144]},
    {"organoid_id": "org-5", "anchor": [96, 96]}
  ],
  "objects": [
    {"cyst_id": "cyst-1", "organoid_id": "org-1", "appear_frame": 0,
     "center": [40, 44], "radius": {"start": 8, "slope": 2.5}, "contrast": 90},
    {"cyst_id": "cyst-2", "organoid_id": "org-2", "appear_frame": 1,
     "center": {"start": [136, 40], "velocity": [2, 1.5]}, "radius": {"start": 7, "slope": 1.5}, "contrast": 85},
    {"cyst_id": "cyst-3", "organoid_id": "org-2", "appear_frame": 3,
     "center": [160, 90], "radius": [0, 0, 0, 7, 9, 11, 13], "contrast": 80},
    {"cyst_id": "cyst-4", "organoid_id": "org-3", "appear_frame": 2,
     "center": [52, 146], "radius": [0, 0, 8, 10, 12, 13, 14], "contrast": -55},
    {"cyst_id": "cyst-5", "organoid_id": "org-4", "appear_frame": 0,
     "center": [140, 150], "radius": 12, "contrast": 75}
  ]
})"},
};

}  // namespace

std::vector<std::string> builtin_scenario_names() {
  std::vector<std::string> names;
  for (const auto& [name, doc] : kBuiltins) names.emplace_back(name);
  return names;
}

Scenario builtin_scenario(const std::string& name) {
  for (const auto& [n, doc] : kBuiltins)
    if (name == n) return scenario_from_json(nlohmann::json::parse(doc));
  throw SynthError("UnknownScenario", name, "no built-in scenario named '" + name + "'");
}

}  // namespace cystrack
