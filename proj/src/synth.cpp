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

#include "cystrack/image_io.hpp"
#include "cystrack/mask.hpp"
#include "cystrack/protocol.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

namespace cystrack {

using nlohmann::json;

void check(const Scenario& s) {
  auto bad = [&](const std::string& entity, const std::string& msg) -> void {
    throw SynthError("InvalidScenario", entity, "scenario '" + s.name + "': " + msg);
  };
  if (s.width < 4 || s.height < 4) bad("size", "frames must be at least 4x4");
  if (s.frame_count < 2) bad("frame_count", "need at least 2 frames");
  if (s.bit_depth != 8 && s.bit_depth != 16) bad("bit_depth", "bit depth must be 8 or 16");
  if (!(s.um_per_pixel > 0.0) || !(s.total_duration_hours > 0.0)) bad("calibration", "calibration must be positive");
  if (s.noise_sigma < 0.0) bad("noise_sigma", "noise must be non-negative");
  if (s.objects.empty()) bad("objects", "no objects");

  std::set<std::string> ids;
  for (const SynthObject& o : s.objects) {
    if (!ids.insert(o.cyst_id).second) bad(o.cyst_id, "duplicate object id '" + o.cyst_id + "'");
    if (o.organoid_id.empty()) bad(o.cyst_id, "object '" + o.cyst_id + "' has no organoid");
    if (int(o.center.size()) != s.frame_count || int(o.radius.size()) != s.frame_count)
      bad(o.cyst_id, "object '" + o.cyst_id + "' needs one centre and radius per frame");
    if (o.appear_frame < 0 || o.appear_frame >= s.frame_count)
      bad(o.cyst_id, "object '" + o.cyst_id + "' appears outside the video");
    for (int f = o.appear_frame; f < s.frame_count; ++f) {
      const double r = o.radius[std::size_t(f)];
      const Eigen::Vector2d& c = o.center[std::size_t(f)];
      if (!(r > 0.0)) bad(o.cyst_id, "object '" + o.cyst_id + "' has radius <= 0 at frame " + std::to_string(f));
      if (c.x() - r < 0.0 || c.y() - r < 0.0 || c.x() + r > s.width - 1 || c.y() + r > s.height - 1)
        throw SynthError("OutOfBounds", o.cyst_id,
                         "object '" + o.cyst_id + "' leaves the frame at frame " + std::to_string(f));
    }
  }
  std::set<std::string> organoids;
  for (const SynthOrganoid& g : s.organoids) {
    if (!organoids.insert(g.organoid_id).second) bad(g.organoid_id, "duplicate organoid '" + g.organoid_id + "'");
    if (g.anchor_x < 0 || g.anchor_y < 0 || g.anchor_x >= s.width || g.anchor_y >= s.height)
      throw SynthError("OutOfBounds", g.organoid_id, "anchor of organoid '" + g.organoid_id + "' is outside the frame");
  }
}

namespace {

std::string id_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  throw SynthError("InvalidScenario", "", "identifiers must be strings or integers");
}

std::vector<double> scalar_path(const json& v, int frames) {
  std::vector<double> out;
  if (v.is_number()) return std::vector<double>(std::size_t(frames), v.get<double>());
  if (v.is_array()) return v.get<std::vector<double>>();
  if (v.is_object()) {
    const double start = v.at("start").get<double>();
    const double slope = v.value("slope", 0.0);
    for (int f = 0; f < frames; ++f) out.push_back(start + slope * f);
    return out;
  }
  throw SynthError("InvalidScenario", "radius", "radius must be a number, a list, or {start, slope}");
}

std::vector<Eigen::Vector2d> point_path(const json& v, int frames) {
  std::vector<Eigen::Vector2d> out;
  if (v.is_object()) {
    const auto start = v.at("start").get<std::array<double, 2>>();
    const auto vel = v.value("velocity", std::array<double, 2>{0.0, 0.0});
    for (int f = 0; f < frames; ++f) out.emplace_back(start[0] + vel[0] * f, start[1] + vel[1] * f);
    return out;
  }
  if (v.is_array() && v.size() == 2 && v[0].is_number()) {
    const auto p = v.get<std::array<double, 2>>();
    return std::vector<Eigen::Vector2d>(std::size_t(frames), Eigen::Vector2d(p[0], p[1]));
  }
  if (v.is_array()) {
    for (const json& p : v) {
      const auto xy = p.get<std::array<double, 2>>();
      out.emplace_back(xy[0], xy[1]);
    }
    return out;
  }
  throw SynthError("InvalidScenario", "center", "center must be [x, y], a list of points, or {start, velocity}");
}

}  // namespace

Scenario scenario_from_json(const json& doc) {
  try {
    Scenario s;
    s.name = doc.value("name", std::string("scenario"));
    s.seed = doc.value("seed", std::uint64_t{0});
    s.width = doc.at("width").get<int>();
    s.height = doc.at("height").get<int>();
    s.frame_count = doc.at("frame_count").get<int>();
    s.bit_depth = doc.value("bit_depth", 8);
    s.um_per_pixel = doc.value("um_per_pixel", 1.0);
    s.total_duration_hours = doc.value("total_duration_hours", 144.0);
    if (const auto bg = doc.find("background"); bg != doc.end()) {
      s.background_level = bg->value("level", s.background_level);
      s.noise_sigma = bg->value("noise_sigma", s.noise_sigma);
    }
    for (const json& g : doc.value("organoids", json::array())) {
      const auto a = g.at("anchor").get<std::array<double, 2>>();
      s.organoids.push_back({id_string(g.at("organoid_id")), a[0], a[1]});
    }
    for (const json& o : doc.at("objects")) {
      SynthObject obj;
      obj.cyst_id = id_string(o.at("cyst_id"));
      obj.organoid_id = id_string(o.at("organoid_id"));
      obj.appear_frame = o.value("appear_frame", 0);
      obj.center = point_path(o.at("center"), s.frame_count);
      obj.radius = scalar_path(o.at("radius"), s.frame_count);
      obj.contrast = o.value("contrast", obj.contrast);
      s.objects.push_back(std::move(obj));
    }
    return s;
  } catch (const json::exception& e) {
    throw SynthError("InvalidScenario", "", std::string("malformed scenario: ") + e.what());
  }
}

json to_json(const Scenario& s) {
  json objects = json::array();
  for (const SynthObject& o : s.objects) {
    json centers = json::array();
    for (const Eigen::Vector2d& c : o.center) centers.push_back({c.x(), c.y()});
    objects.push_back({{"cyst_id", o.cyst_id},
                       {"organoid_id", o.organoid_id},
                       {"appear_frame", o.appear_frame},
                       {"center", centers},
                       {"radius", o.radius},
                       {"contrast", o.contrast}});
  }
  json organoids = json::array();
  for (const SynthOrganoid& g : s.organoids)
    organoids.push_back({{"organoid_id", g.organoid_id}, {"anchor", {g.anchor_x, g.anchor_y}}});
  return {{"name", s.name},
          {"seed", s.seed},
          {"width", s.width},
          {"height", s.height},
          {"frame_count", s.frame_count},
          {"bit_depth", s.bit_depth},
          {"um_per_pixel", s.um_per_pixel},
          {"total_duration_hours", s.total_duration_hours},
          {"background", {{"level", s.background_level}, {"noise_sigma", s.noise_sigma}}},
          {"organoids", organoids},
          {"objects", objects}};
}

Scenario load_scenario(const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = io::read_file(path);
  json doc;
  try {
    doc = json::parse(bytes.begin(), bytes.end());
  } catch (const json::parse_error& e) {
    throw SynthError("InvalidScenario", path.string(), path.string() + ": " + e.what());
  }
  return scenario_from_json(doc);
}

BinaryMask rasterize_disk(int width, int height, const Eigen::Vector2d& center, double radius) {
  BinaryMask m(height, width);
  const double r2 = radius * radius;
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double dx = x - center.x(), dy = y - center.y();
      m(y, x) = dx * dx + dy * dy <= r2;
    }
  return m;
}

namespace {

// Box-Muller on top of mt19937_64; std::normal_distribution is not
// reproducible across standard libraries.
class Gaussian {
 public:
  explicit Gaussian(std::uint64_t seed) : rng_(seed) {}
  double operator()() {
    if (spare_) {
      spare_ = false;
      return cached_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    cached_ = mag * std::sin(2.0 * std::numbers::pi * u2);
    spare_ = true;
    return mag * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  double uniform() { return double(rng_() >> 11) * 0x1.0p-53; }
  std::mt19937_64 rng_;
  bool spare_ = false;
  double cached_ = 0.0;
};

constexpr int kSupersample = 4;

// Fraction of the pixel at (x, y) covered by the disk.
double coverage(int x, int y, const Eigen::Vector2d& c, double r) {
  const double dx = std::abs(x - c.x()), dy = std::abs(y - c.y());
  if (dx > r + 1.0 || dy > r + 1.0) return 0.0;
  const double r2 = r * r;
  int hits = 0;
  for (int j = 0; j < kSupersample; ++j)
    for (int i = 0; i < kSupersample; ++i) {
      const double sx = x - 0.5 + (i + 0.5) / kSupersample - c.x();
      const double sy = y - 0.5 + (j + 0.5) / kSupersample - c.y();
      hits += sx * sx + sy * sy <= r2;
    }
  return double(hits) / (kSupersample * kSupersample);
}

}  // namespace

SynthOutput render(const Scenario& s) {
  check(s);
  SynthOutput out;
  const double max_value = s.bit_depth == 16 ? 65535.0 : 255.0;
  Gaussian noise(s.seed);

  out.frames.bit_depth = s.bit_depth;
  for (int f = 0; f < s.frame_count; ++f) {
    Image<double> canvas = Image<double>::Constant(s.height, s.width, s.background_level);
    for (const SynthObject& o : s.objects) {
      if (f < o.appear_frame) continue;
      const Eigen::Vector2d c = o.center[std::size_t(f)];
      const double r = o.radius[std::size_t(f)];
      const int x0 = std::max(0, int(std::floor(c.x() - r - 1))), x1 = std::min(s.width, int(std::ceil(c.x() + r + 2)));
      const int y0 = std::max(0, int(std::floor(c.y() - r - 1))), y1 = std::min(s.height, int(std::ceil(c.y() + r + 2)));
      for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) canvas(y, x) += o.contrast * coverage(x, y, c, r);
    }
    Frame frame(s.height, s.width);
    for (int y = 0; y < s.height; ++y)
      for (int x = 0; x < s.width; ++x) {
        const double v = canvas(y, x) + (s.noise_sigma > 0.0 ? s.noise_sigma * noise() : 0.0);
        frame(y, x) = std::uint16_t(std::clamp(std::round(v), 0.0, max_value));
      }
    out.frames.frames.push_back(std::move(frame));
    out.frames.source_ids.push_back(io::frame_file_name(f));
  }

  out.truth.width = s.width;
  out.truth.height = s.height;
  out.truth.frame_count = s.frame_count;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const SynthObject& o = s.objects[i];
    CystTrack ct;
    ct.cyst_index = int(i);
    ct.formation_frame = o.appear_frame;
    for (int f = 0; f < s.frame_count; ++f) {
      if (f < o.appear_frame) {
        ct.masks.emplace_back();
        continue;
      }
      ct.masks.emplace_back(rasterize_disk(s.width, s.height, o.center[std::size_t(f)], o.radius[std::size_t(f)]));
    }
    out.truth.cysts.push_back(std::move(ct));
  }

  // Organoids in order of first mention; explicit anchors win, otherwise the
  // final-frame centre of the organoid's first cyst.
  AnnotationSession& a = out.session;
  a.frame_width = s.width;
  a.frame_height = s.height;
  a.annotated_frame_index = s.frame_count - 1;
  a.calibration = {s.um_per_pixel, s.total_duration_hours, s.frame_count, std::nullopt};
  std::map<std::string, std::size_t> slot;
  auto organoid = [&](const std::string& id, double ax, double ay) -> OrganoidAnnotation& {
    const auto [it, fresh] = slot.try_emplace(id, a.organoids.size());
    if (fresh) a.organoids.push_back({id, ax, ay, {}});
    return a.organoids[it->second];
  };
  for (const SynthOrganoid& g : s.organoids) organoid(g.organoid_id, g.anchor_x, g.anchor_y);
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const SynthObject& o = s.objects[i];
    const Eigen::Vector2d c = o.center.back();
    OrganoidAnnotation& org = organoid(o.organoid_id, std::round(c.x()), std::round(c.y()));
    org.cysts.push_back({o.cyst_id, bounding_box(*out.truth.cysts[i].masks.back())});
  }
  // Track order follows the session's document order.
  std::vector<CystTrack> ordered;
  for (const OrganoidAnnotation& org : a.organoids)
    for (const CystPrompt& p : org.cysts)
      for (std::size_t i = 0; i < s.objects.size(); ++i)
        if (s.objects[i].cyst_id == p.cyst_id) {
          CystTrack ct = out.truth.cysts[i];
          ct.cyst_index = int(ordered.size());
          ordered.push_back(std::move(ct));
        }
  out.truth.cysts = std::move(ordered);
  return out;
}

json ground_truth_to_json(const TrackResult& truth, const AnnotationSession& session) {
  std::vector<const CystPrompt*> prompts;
  for (const OrganoidAnnotation& org : session.organoids)
    for (const CystPrompt& p : org.cysts) prompts.push_back(&p);
  json cysts = json::array();
  for (const CystTrack& ct : truth.cysts) {
    json frames = json::array();
    for (std::size_t f = 0; f < ct.masks.size(); ++f) {
      const bool present = ct.masks[f].has_value();
      frames.push_back({{"frame", f},
                        {"present", present},
                        {"area_px", present ? ct.masks[f]->count() : 0},
                        {"rle", present ? json(rle_encode(*ct.masks[f])) : json::array()}});
    }
    cysts.push_back({{"cyst_id", prompts.at(std::size_t(ct.cyst_index))->cyst_id},
                     {"formation_frame", ct.formation_frame},
                     {"frames", frames}});
  }
  return {{"width", truth.width}, {"height", truth.height}, {"frame_count", truth.frame_count}, {"cysts", cysts}};
}

void write_synth_output(const SynthOutput& out, const Scenario& scenario, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(ErrorCategory::output, dir.string(), "cannot create " + dir.string() + ": " + ec.message());
  io::save_frame_directory(out.frames, dir / "frames");
  save_annotation(out.session, dir / "annotation.json");
  io::write_file(dir / "ground_truth.json", ground_truth_to_json(out.truth, out.session).dump(2) + "\n");
  io::write_file(dir / "scenario.json", to_json(scenario).dump(2) + "\n");
}

}  // namespace cystrack
