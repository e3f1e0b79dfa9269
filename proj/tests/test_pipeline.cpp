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
#include "cystrack/pipeline.hpp"
#include "cystrack/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <cstdlib>

using namespace cystrack;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kDemo = fs::path(CYSTRACK_SOURCE_DIR) / "data/demo";

std::string code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return "ok";
}

std::vector<fs::path> leftovers(const fs::path& parent) {
  std::vector<fs::path> out;
  for (const auto& e : fs::directory_iterator(parent))
    if (e.path().filename().string().find(".partial-") != std::string::npos) out.push_back(e.path());
  return out;
}

struct Failing : SegmenterBackend {
  std::string name() const override { return "failing"; }
  std::vector<Timeline> segment(const SegmenterRequest&, const TrackerParams&, const TrackControl&) override {
    throw TrackingError("BackendFailure", "", "segmenter crashed");
  }
};

}  // namespace

TEST_CASE("params documents") {
  PipelineParams p = params_from_json({{"iou_floor", 0.5}, {"quality", "preview"}, {"component_policy", "merge"}});
  CHECK(p.tracker.iou_floor == 0.5);
  CHECK(p.tracker.min_area_px == 10);
  CHECK(p.quality == Quality::preview);
  CHECK(p.component_policy == ComponentPolicy::merge);
  CHECK(params_from_json(to_json(p)).tracker == p.tracker);

  CHECK(code_of([] { params_from_json({{"iou_flor", 0.5}}); }) == "BadParams");
  CHECK(code_of([] { params_from_json({{"iou_floor", 1.5}}); }) == "BadParams");
  CHECK(code_of([] { params_from_json({{"min_area_px", 0}}); }) == "BadParams");
  CHECK(code_of([] { params_from_json({{"min_area_px", 2.5}}); }) == "BadParams");
  CHECK(code_of([] { params_from_json({{"search_margin", "wide"}}); }) == "BadParams");
  CHECK(code_of([] { params_from_json(json::array()); }) == "BadParams");
}

TEST_CASE("report timestamp honours SOURCE_DATE_EPOCH") {
  ::setenv("SOURCE_DATE_EPOCH", "86400", 1);
  CHECK(report_timestamp() == "1970-01-02T00:00:00Z");
  ::unsetenv("SOURCE_DATE_EPOCH");
  CHECK(report_timestamp().size() == 20);
}

TEST_CASE("inputs carry content hashes") {
  const PipelineInputs in = load_inputs(kDemo / "frames", kDemo / "annotation.json");
  CHECK(in.frames.size() == 7);
  CHECK(in.provenance["annotation_sha256"] == io::sha256_hex(io::read_file(kDemo / "annotation.json")));
  CHECK(in.provenance["frames"][3]["name"] == "frame_0003.png");
  CHECK(in.provenance["frames"][3]["sha256"] == io::sha256_hex(io::read_file(kDemo / "frames/frame_0003.png")));

  try {
    load_inputs(kDemo / "frames", kDemo / "missing.json");
    FAIL("expected IoError");
  } catch (const IoError& e) {
    CHECK(e.category() == ErrorCategory::input);
  }
  CHECK_THROWS_AS(load_inputs(kDemo / "nope", kDemo / "annotation.json"), IoError);
}

TEST_CASE("run, rerun and refuse foreign directories") {
  const fs::path root = testsupport::scratch_dir("pipeline");
  const PipelineInputs in = load_inputs(kDemo / "frames", kDemo / "annotation.json");
  BaselineBackend backend;
  const RunResult r = run_pipeline(in, backend, {}, root / "out");
  CHECK(r.manifest["artifacts"].size() == 14);
  CHECK(fs::is_regular_file(root / "out/manifest.json"));
  CHECK(r.metrics.records.size() == 5);

  // A previous report may be replaced.
  CHECK_NOTHROW(run_pipeline(in, backend, {}, root / "out"));
  CHECK(leftovers(root).empty());

  fs::create_directories(root / "precious");
  io::write_file(root / "precious/notes.txt", std::string_view("keep me"));
  try {
    run_pipeline(in, backend, {}, root / "precious");
    FAIL("expected OutputExists");
  } catch (const Error& e) {
    CHECK(e.code() == "OutputExists");
    CHECK(e.category() == ErrorCategory::output);
  }
  CHECK(fs::is_regular_file(root / "precious/notes.txt"));
  CHECK_FALSE(fs::exists(root / "precious/manifest.json"));

  fs::create_directories(root / "empty");
  CHECK_NOTHROW(run_pipeline(in, backend, {}, root / "empty"));
  fs::remove_all(root);
}

TEST_CASE("a failed run leaves no output") {
  const fs::path root = testsupport::scratch_dir("pipeline-fail");
  const PipelineInputs in = load_inputs(kDemo / "frames", kDemo / "annotation.json");
  Failing backend;
  CHECK(code_of([&] { run_pipeline(in, backend, {}, root / "out"); }) == "BackendFailure");
  CHECK_FALSE(fs::exists(root / "out"));
  CHECK(leftovers(root).empty());

  // Invalid annotation is rejected before tracking.
  PipelineInputs bad = in;
  bad.annotation.organoids[0].cysts[0].bbox = {0, 0, 1000, 10};
  BaselineBackend baseline;
  CHECK(code_of([&] { run_pipeline(bad, baseline, {}, root / "out"); }) == "BoxOutOfBounds");
  CHECK_FALSE(fs::exists(root / "out"));
  fs::remove_all(root);
}

TEST_CASE("the manifest records params, backend and warnings") {
  const fs::path root = testsupport::scratch_dir("pipeline-manifest");
  const PipelineInputs in = load_inputs(kDemo / "frames", kDemo / "annotation.json");
  BaselineBackend backend;
  PipelineParams p;
  p.quality = Quality::preview;
  p.tracker.search_margin = 0.3;
  std::vector<std::string> logged;
  TrackControl control;
  control.on_log = [&](std::string_view l) { logged.emplace_back(l); };
  const RunResult r = run_pipeline(in, backend, p, root / "out", control);
  CHECK(r.manifest["backend"] == "baseline");
  CHECK(r.manifest["quality"] == "preview");
  CHECK(r.manifest["params"]["search_margin"] == 0.3);
  CHECK(r.manifest["inputs"] == in.provenance);
  CHECK(r.manifest["tool"] == "cystrack");
  CHECK(r.manifest["versions"].contains("cystrack"));
  CHECK_FALSE(logged.empty());
  fs::remove_all(root);
}
