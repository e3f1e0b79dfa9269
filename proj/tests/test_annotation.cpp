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

#include "cystrack/annotation.hpp"

#include <doctest.h>

#include <filesystem>

using namespace cystrack;
using nlohmann::json;

namespace {

AnnotationSession two_organoids() {
  AnnotationSession s;
  s.frame_width = 100;
  s.frame_height = 80;
  s.annotated_frame_index = 4;
  s.calibration = {0.5, 48.0, 5, std::nullopt};
  s.organoids = {
      {"A", 20.0, 20.0, {{"a1", {10, 10, 20, 20}}, {"a2", {30, 10, 40, 22}}}},
      {"B", 70.0, 50.0, {}},
  };
  return s;
}

std::string error_code(const AnnotationSession& s) {
  try {
    validate(s);
  } catch (const AnnotationError& e) {
    return e.code() + ":" + e.entity();
  }
  return "ok";
}

}  // namespace

TEST_CASE("valid session resolves dense indices in document order") {
  const ValidatedSession v = validate(two_organoids());
  CHECK(v.organoid_count() == 2);
  REQUIRE(v.cyst_count() == 2);
  CHECK(v.cysts()[1].index == 1);
  CHECK(v.cysts()[1].organoid_index == 0);
  CHECK(v.cysts()[1].cyst_id == "a2");
  CHECK(v.timestamps() == std::vector<double>{0, 12, 24, 36, 48});
}

TEST_CASE("validation failures name the offending entity") {
  AnnotationSession s = two_organoids();
  s.organoids.clear();
  CHECK(error_code(s) == "NoOrganoids:");

  s = two_organoids();
  s.organoids[1].organoid_id = "A";
  CHECK(error_code(s) == "DuplicateOrganoid:A");

  s = two_organoids();
  s.organoids[1].anchor_x = 100.0;
  CHECK(error_code(s) == "AnchorOutOfBounds:B");

  s = two_organoids();
  s.organoids[0].cysts[1].bbox = {90, 70, 101, 80};
  CHECK(error_code(s) == "BoxOutOfBounds:a2");

  s = two_organoids();
  s.organoids[0].cysts[1].bbox = {30, 10, 31, 13};  // 3 px
  CHECK(error_code(s) == "BoxOutOfBounds:a2");

  s = two_organoids();
  s.organoids[0].cysts[0].bbox = {20, 10, 10, 20};
  CHECK(error_code(s) == "BoxOutOfBounds:a1");

  s = two_organoids();
  s.organoids[1].cysts.push_back({"a1", {50, 50, 60, 60}});
  CHECK(error_code(s) == "DuplicateCystAssignment:a1");

  s = two_organoids();
  s.organoids[1].cysts.push_back({"b1", {10, 10, 20, 20}});
  CHECK(error_code(s) == "DuplicateBox:b1");

  s = two_organoids();
  s.annotated_frame_index = 2;
  CHECK(error_code(s) == "WrongAnnotatedFrame:2");

  s = two_organoids();
  s.calibration.um_per_pixel = 0.0;
  CHECK(error_code(s) == "BadCalibration:um_per_pixel");

  s = two_organoids();
  s.calibration.frame_count = 1;
  s.annotated_frame_index = 0;
  CHECK(error_code(s) == "BadCalibration:frame_count");
}

TEST_CASE("validation against a concrete video") {
  const AnnotationSession s = two_organoids();
  CHECK_NOTHROW(validate(s, 100, 80, 5));
  try {
    validate(s, 100, 80, 6);
    FAIL("expected FrameMismatch");
  } catch (const AnnotationError& e) {
    CHECK(e.code() == "FrameMismatch");
    CHECK(e.category() == ErrorCategory::input);
  }
  CHECK_THROWS_AS(validate(s, 99, 80, 5), AnnotationError);
}

TEST_CASE("timestamps: even spacing and explicit override") {
  CHECK(timestamps({1.0, 144.0, 7, std::nullopt}) == std::vector<double>{0, 24, 48, 72, 96, 120, 144});
  CHECK(timestamps({1.0, 1.0, 2, std::nullopt}) == std::vector<double>{0, 1});
  CHECK(timestamps({1.0, 10.0, 3, std::vector<double>{0, 2, 10}}) == std::vector<double>{0, 2, 10});
  CHECK_THROWS_AS(timestamps({1.0, 10.0, 3, std::vector<double>{0, 2}}), AnnotationError);
  CHECK_THROWS_AS(timestamps({1.0, 10.0, 3, std::vector<double>{0, 2, 2}}), AnnotationError);
  CHECK_THROWS_AS(timestamps({1.0, -1.0, 3, std::nullopt}), AnnotationError);
}

TEST_CASE("json round trip, integer ids become strings") {
  const AnnotationSession s = two_organoids();
  CHECK(annotation_from_json(to_json(s)) == s);

  json doc = to_json(s);
  doc["organoids"][0]["organoid_id"] = 7;
  doc["organoids"][0]["cysts"][0]["cyst_id"] = 12;
  doc["calibration"]["timestamps_hours"] = {0, 1, 2, 3, 50};
  const AnnotationSession parsed = annotation_from_json(doc);
  CHECK(parsed.organoids[0].organoid_id == "7");
  CHECK(parsed.organoids[0].cysts[0].cyst_id == "12");
  REQUIRE(parsed.calibration.timestamps_hours.has_value());
  CHECK(parsed.calibration.timestamps_hours->back() == 50.0);
}

TEST_CASE("malformed documents") {
  json doc = to_json(two_organoids());
  doc.erase("calibration");
  CHECK_THROWS_WITH_AS(annotation_from_json(doc), doctest::Contains("calibration"), AnnotationError);

  doc = to_json(two_organoids());
  doc["organoids"][0]["cysts"][0]["bbox"] = {1, 2, 3};
  CHECK_THROWS_AS(annotation_from_json(doc), AnnotationError);

  doc = to_json(two_organoids());
  doc["frame_width"] = 10.5;
  CHECK_THROWS_AS(annotation_from_json(doc), AnnotationError);

  CHECK_THROWS_AS(annotation_from_json(json::array()), AnnotationError);
}

TEST_CASE("save and load") {
  const std::filesystem::path p = std::filesystem::temp_directory_path() / "cystrack_test_annotation.json";
  save_annotation(two_organoids(), p);
  CHECK(load_annotation(p) == two_organoids());
  std::filesystem::remove(p);
  CHECK_THROWS_AS(load_annotation(p), IoError);
}

TEST_CASE("fixture scene declares 14 organoids and 7 cysts") {
  const ValidatedSession v =
      validate(load_annotation(std::filesystem::path(CYSTRACK_SOURCE_DIR) / "tests/fixtures/population_annotation.json"));
  CHECK(v.organoid_count() == 14);
  CHECK(v.cyst_count() == 7);
}
