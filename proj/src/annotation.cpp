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

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace cystrack {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& code, const std::string& entity, const std::string& message) {
  throw AnnotationError(code, entity, message);
}

std::string describe(const PixelBox& b) {
  std::ostringstream os;
  os << "(" << b.x0 << "," << b.y0 << ")-(" << b.x1 << "," << b.y1 << ")";
  return os.str();
}

}  // namespace

std::vector<double> timestamps(const Calibration& c) {
  if (!(c.um_per_pixel > 0.0) || !std::isfinite(c.um_per_pixel))
    fail("BadCalibration", "um_per_pixel", "um_per_pixel must be a positive finite number");
  if (!(c.total_duration_hours > 0.0) || !std::isfinite(c.total_duration_hours))
    fail("BadCalibration", "total_duration_hours", "total duration must be a positive finite number of hours");
  if (c.frame_count < 2) fail("BadCalibration", "frame_count", "frame_count must be at least 2");

  if (c.timestamps_hours) {
    const std::vector<double>& t = *c.timestamps_hours;
    if (int(t.size()) != c.frame_count)
      fail("BadCalibration", "timestamps_hours",
           "expected " + std::to_string(c.frame_count) + " timestamps, got " + std::to_string(t.size()));
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (!std::isfinite(t[i])) fail("BadCalibration", "timestamps_hours", "timestamps must be finite");
      if (i > 0 && !(t[i] > t[i - 1]))
        fail("BadCalibration", "timestamps_hours", "timestamps must be strictly increasing");
    }
    return t;
  }

  std::vector<double> t(std::size_t(c.frame_count));
  const double last = double(c.frame_count - 1);
  for (int i = 0; i < c.frame_count; ++i) t[std::size_t(i)] = double(i) * c.total_duration_hours / last;
  return t;
}

ValidatedSession validate(const AnnotationSession& s, int frame_width, int frame_height, int frame_count) {
  if (s.organoids.empty()) fail("NoOrganoids", "", "annotation declares no organoids");

  ValidatedSession v;
  v.timestamps_ = timestamps(s.calibration);

  if (s.calibration.frame_count != frame_count)
    fail("FrameMismatch", "frame_count",
         "calibration declares " + std::to_string(s.calibration.frame_count) + " frames but the video has " +
             std::to_string(frame_count));
  if (s.frame_width != frame_width || s.frame_height != frame_height)
    fail("FrameMismatch", "frame_size",
         "annotation is for " + std::to_string(s.frame_width) + "x" + std::to_string(s.frame_height) +
             " frames but the video is " + std::to_string(frame_width) + "x" + std::to_string(frame_height));
  if (s.annotated_frame_index != frame_count - 1)
    fail("WrongAnnotatedFrame", std::to_string(s.annotated_frame_index),
         "annotations must be made on the last frame (index " + std::to_string(frame_count - 1) + "), not " +
             std::to_string(s.annotated_frame_index));

  std::set<std::string> organoid_ids;
  std::set<std::string> cyst_ids;
  std::set<std::tuple<int, int, int, int>> boxes;
  int organoid_index = 0;
  for (const OrganoidAnnotation& o : s.organoids) {
    if (!organoid_ids.insert(o.organoid_id).second)
      fail("DuplicateOrganoid", o.organoid_id, "organoid id '" + o.organoid_id + "' is used twice");
    if (!(o.anchor_x >= 0.0 && o.anchor_x < frame_width && o.anchor_y >= 0.0 && o.anchor_y < frame_height))
      fail("AnchorOutOfBounds", o.organoid_id, "anchor of organoid '" + o.organoid_id + "' lies outside the frame");

    for (const CystPrompt& c : o.cysts) {
      const PixelBox& b = c.bbox;
      if (b.x0 >= b.x1 || b.y0 >= b.y1)
        fail("BoxOutOfBounds", c.cyst_id, "box of cyst '" + c.cyst_id + "' is degenerate: " + describe(b));
      if (b.x0 < 0 || b.y0 < 0 || b.x1 > frame_width || b.y1 > frame_height)
        fail("BoxOutOfBounds", c.cyst_id, "box of cyst '" + c.cyst_id + "' leaves the frame: " + describe(b));
      if (b.area() < 4)
        fail("BoxOutOfBounds", c.cyst_id, "box of cyst '" + c.cyst_id + "' covers fewer than 4 pixels");
      if (!cyst_ids.insert(c.cyst_id).second)
        fail("DuplicateCystAssignment", c.cyst_id, "cyst id '" + c.cyst_id + "' appears more than once");
      if (!boxes.insert({b.x0, b.y0, b.x1, b.y1}).second)
        fail("DuplicateBox", c.cyst_id, "cyst '" + c.cyst_id + "' repeats an existing box " + describe(b));

      v.cysts_.push_back(CystRef{int(v.cysts_.size()), organoid_index, c.cyst_id, o.organoid_id, b});
    }
    ++organoid_index;
  }

  v.session_ = s;
  return v;
}

ValidatedSession validate(const AnnotationSession& s) {
  return validate(s, s.frame_width, s.frame_height, s.calibration.frame_count);
}

namespace {

std::string id_from_json(const json& j, const std::string& what) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<std::int64_t>());
  fail("Malformed", what, what + " must be a string or an integer");
}

int integral(const json& j, const std::string& what) {
  if (!j.is_number()) fail("Malformed", what, what + " must be a number");
  const double d = j.get<double>();
  if (std::floor(d) != d || std::abs(d) > 1e9) fail("Malformed", what, what + " must be an integer");
  return int(d);
}

const json& field(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) fail("Malformed", where, where + " must be an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail("Malformed", where, std::string("missing key '") + key + "' in " + where);
  return *it;
}

}  // namespace

AnnotationSession annotation_from_json(const json& doc) {
  AnnotationSession s;
  s.frame_width = integral(field(doc, "frame_width", "document"), "frame_width");
  s.frame_height = integral(field(doc, "frame_height", "document"), "frame_height");
  s.annotated_frame_index = integral(field(doc, "annotated_frame_index", "document"), "annotated_frame_index");

  const json& cal = field(doc, "calibration", "document");
  const json& um = field(cal, "um_per_pixel", "calibration");
  const json& dur = field(cal, "total_duration_hours", "calibration");
  if (!um.is_number() || !dur.is_number())
    fail("Malformed", "calibration", "calibration values must be numbers");
  s.calibration.um_per_pixel = um.get<double>();
  s.calibration.total_duration_hours = dur.get<double>();
  s.calibration.frame_count = integral(field(cal, "frame_count", "calibration"), "frame_count");
  if (const auto it = cal.find("timestamps_hours"); it != cal.end() && !it->is_null()) {
    if (!it->is_array()) fail("Malformed", "timestamps_hours", "timestamps_hours must be an array");
    std::vector<double> t;
    for (const json& v : *it) {
      if (!v.is_number()) fail("Malformed", "timestamps_hours", "timestamps must be numbers");
      t.push_back(v.get<double>());
    }
    s.calibration.timestamps_hours = std::move(t);
  }

  const json& organoids = field(doc, "organoids", "document");
  if (!organoids.is_array()) fail("Malformed", "organoids", "organoids must be an array");
  for (const json& o : organoids) {
    OrganoidAnnotation oa;
    oa.organoid_id = id_from_json(field(o, "organoid_id", "organoid"), "organoid_id");
    const json& anchor = field(o, "anchor", "organoid '" + oa.organoid_id + "'");
    if (!anchor.is_array() || anchor.size() != 2 || !anchor[0].is_number() || !anchor[1].is_number())
      fail("Malformed", oa.organoid_id, "anchor must be [x, y]");
    oa.anchor_x = anchor[0].get<double>();
    oa.anchor_y = anchor[1].get<double>();
    const json& cysts = field(o, "cysts", "organoid '" + oa.organoid_id + "'");
    if (!cysts.is_array()) fail("Malformed", oa.organoid_id, "cysts must be an array");
    for (const json& c : cysts) {
      CystPrompt cp;
      cp.cyst_id = id_from_json(field(c, "cyst_id", "cyst"), "cyst_id");
      const json& b = field(c, "bbox", "cyst '" + cp.cyst_id + "'");
      if (!b.is_array() || b.size() != 4) fail("Malformed", cp.cyst_id, "bbox must be [x0, y0, x1, y1]");
      cp.bbox = {integral(b[0], "bbox"), integral(b[1], "bbox"), integral(b[2], "bbox"), integral(b[3], "bbox")};
      oa.cysts.push_back(std::move(cp));
    }
    s.organoids.push_back(std::move(oa));
  }
  return s;
}

json to_json(const AnnotationSession& s) {
  json organoids = json::array();
  for (const OrganoidAnnotation& o : s.organoids) {
    json cysts = json::array();
    for (const CystPrompt& c : o.cysts)
      cysts.push_back({{"cyst_id", c.cyst_id}, {"bbox", {c.bbox.x0, c.bbox.y0, c.bbox.x1, c.bbox.y1}}});
    organoids.push_back({{"organoid_id", o.organoid_id}, {"anchor", {o.anchor_x, o.anchor_y}}, {"cysts", cysts}});
  }
  json cal = {{"um_per_pixel", s.calibration.um_per_pixel},
              {"total_duration_hours", s.calibration.total_duration_hours},
              {"frame_count", s.calibration.frame_count}};
  if (s.calibration.timestamps_hours) cal["timestamps_hours"] = *s.calibration.timestamps_hours;
  return {{"frame_width", s.frame_width},
          {"frame_height", s.frame_height},
          {"annotated_frame_index", s.annotated_frame_index},
          {"calibration", cal},
          {"organoids", organoids}};
}

AnnotationSession load_annotation(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(ErrorCategory::input, path.string(), "cannot open annotation file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    fail("Malformed", path.string(), std::string("annotation file is not valid JSON: ") + e.what());
  }
  return annotation_from_json(doc);
}

void save_annotation(const AnnotationSession& session, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(ErrorCategory::output, path.string(), "cannot write " + path.string());
  out << to_json(session).dump(2) << '\n';
  if (!out) throw IoError(ErrorCategory::output, path.string(), "write failed for " + path.string());
}

}  // namespace cystrack
