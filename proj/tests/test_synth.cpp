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
#include "cystrack/synth.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace cystrack;
namespace fs = std::filesystem;

TEST_CASE("disk rasterization follows the pixel-centre rule") {
  const BinaryMask d = rasterize_disk(9, 9, {4.0, 4.0}, 1.0);
  CHECK(d.count() == 5);
  CHECK(d(3, 4));
  CHECK_FALSE(d(3, 3));
  CHECK(rasterize_disk(9, 9, {4.0, 4.0}, 0.0).count() == 1);
  // Lattice count against pi r^2. On a pixel-centred disk every radius in
  // [8, 64] stays within 3% except r = 9.5 (293 px, +3.3%).
  for (double r = 8.0; r <= 64.0; r += 0.5) {
    CAPTURE(r);
    const BinaryMask big = rasterize_disk(140, 140, {70.0, 70.0}, r);
    const double err = std::abs(double(big.count()) - std::numbers::pi * r * r) / (std::numbers::pi * r * r);
    if (r == 9.5) CHECK(big.count() == 293);
    else CHECK(err < 0.03);
  }
}

TEST_CASE("rendering is deterministic and seed dependent") {
  Scenario sc = builtin_scenario("drift");
  const SynthOutput a = render(sc);
  const SynthOutput b = render(sc);
  for (int f = 0; f < sc.frame_count; ++f)
    CHECK((a.frames.frames[std::size_t(f)] == b.frames.frames[std::size_t(f)]).all());
  sc.seed += 1;
  const SynthOutput c = render(sc);
  CHECK_FALSE((a.frames.frames[0] == c.frames.frames[0]).all());
  // Truth does not depend on noise.
  for (std::size_t i = 0; i < a.truth.cysts.size(); ++i) CHECK(testsupport::same(a.truth.cysts[i].masks, c.truth.cysts[i].masks));
}

TEST_CASE("ground truth follows appear frames and radii") {
  const Scenario sc = builtin_scenario("late_formation");
  const SynthOutput out = render(sc);
  REQUIRE(out.truth.cysts.size() == sc.objects.size());
  const ValidatedSession v = validate(out.session);
  for (const CystRef& ref : v.cysts()) {
    const auto it = std::find_if(sc.objects.begin(), sc.objects.end(),
                                 [&](const SynthObject& o) { return o.cyst_id == ref.cyst_id; });
    REQUIRE(it != sc.objects.end());
    const CystTrack& t = out.truth.cysts[std::size_t(ref.index)];
    CHECK(t.formation_frame == it->appear_frame);
    for (int f = it->appear_frame; f < sc.frame_count; ++f) {
      const double r = it->radius[std::size_t(f)];
      if (r < 8.0) continue;
      const double want = std::numbers::pi * r * r;
      CHECK(std::abs(double(t.masks[std::size_t(f)]->count()) - want) / want < 0.03);
    }
    // The prompt box is the final ground-truth box.
    CHECK(ref.bbox == bounding_box(*t.masks.back()));
  }
}

TEST_CASE("rendered intensities sit on the background and disk levels") {
  Scenario sc = builtin_scenario("static");
  sc.noise_sigma = 0.0;
  const SynthOutput out = render(sc);
  const Frame& f = out.frames.frames[0];
  CHECK(f(0, 0) == std::uint16_t(std::lround(sc.background_level)));
  const Eigen::Vector2d c = sc.objects[0].center[0];
  CHECK(f(int(c.y()), int(c.x())) == std::uint16_t(std::lround(sc.background_level + sc.objects[0].contrast)));
}

TEST_CASE("16-bit scenarios") {
  Scenario sc = builtin_scenario("growth");
  sc.bit_depth = 16;
  sc.background_level = 20000;
  for (SynthObject& o : sc.objects) o.contrast = 15000;
  sc.noise_sigma = 500;
  const SynthOutput out = render(sc);
  CHECK(out.frames.bit_depth == 16);
  CHECK(out.frames.frames[0].maxCoeff() > 255);
}

TEST_CASE("scenario validation") {
  const auto code = [](const Scenario& s) {
    try {
      check(s);
    } catch (const SynthError& e) {
      return e.code();
    }
    return std::string("ok");
  };
  Scenario sc = builtin_scenario("growth");
  CHECK(code(sc) == "ok");
  sc.objects[0].center.back() = {2.0, 2.0};
  CHECK(code(sc) == "OutOfBounds");
  sc = builtin_scenario("growth");
  sc.objects[0].radius.pop_back();
  CHECK(code(sc) == "InvalidScenario");
  sc = builtin_scenario("growth");
  sc.frame_count = 1;
  CHECK(code(sc) == "InvalidScenario");
  CHECK_THROWS_AS(builtin_scenario("nope"), SynthError);
}

TEST_CASE("scenario json: round trip and linear laws") {
  for (const std::string& name : builtin_scenario_names()) {
    CAPTURE(name);
    const Scenario sc = builtin_scenario(name);
    CHECK(scenario_from_json(nlohmann::json::parse(to_json(sc).dump())) == sc);
  }
  const nlohmann::json doc = {
      {"name", "law"}, {"width", 64}, {"height", 64}, {"frame_count", 3},
      {"objects",
       {{{"cyst_id", "a"}, {"organoid_id", 1}, {"center", {{"start", {20, 30}}, {"velocity", {2, -1}}}},
         {"radius", {{"start", 4}, {"slope", 1.5}}}}}}};
  const Scenario s = scenario_from_json(doc);
  CHECK(s.objects[0].organoid_id == "1");
  CHECK(s.objects[0].center[2] == Eigen::Vector2d(24, 28));
  CHECK(s.objects[0].radius == std::vector<double>{4, 5.5, 7});
  CHECK_THROWS_AS(scenario_from_json({{"width", 3}}), SynthError);
}

TEST_CASE("bundled scenario files match the built-ins") {
  for (const std::string& name : builtin_scenario_names()) {
    CAPTURE(name);
    const fs::path p = fs::path(CYSTRACK_SOURCE_DIR) / "data/scenarios" / (name + ".json");
    CHECK(load_scenario(p) == builtin_scenario(name));
  }
}

TEST_CASE("written output reloads") {
  const Scenario sc = builtin_scenario("two_adjacent");
  const SynthOutput out = render(sc);
  const fs::path dir = testsupport::scratch_dir("synth-out");
  write_synth_output(out, sc, dir);
  const FrameSequence back = io::load_frame_directory(dir / "frames");
  REQUIRE(back.size() == sc.frame_count);
  for (int f = 0; f < sc.frame_count; ++f) CHECK((back.frames[std::size_t(f)] == out.frames.frames[std::size_t(f)]).all());
  CHECK(load_annotation(dir / "annotation.json") == out.session);
  CHECK(load_scenario(dir / "scenario.json") == sc);
  const nlohmann::json gt = nlohmann::json::parse(io::read_file(dir / "ground_truth.json"));
  CHECK(gt.dump() == ground_truth_to_json(out.truth, out.session).dump());
  fs::remove_all(dir);
}
