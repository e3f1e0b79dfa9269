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

#include "cystrack/report.hpp"

#include "cystrack/image_io.hpp"
#include "cystrack/version.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace cystrack {

namespace fs = std::filesystem;
using nlohmann::json;

const char* to_string(Quality q) { return q == Quality::preview ? "preview" : "full"; }

Quality parse_quality(std::string_view text) {
  if (text == "preview") return Quality::preview;
  if (text == "full") return Quality::full;
  throw Error(ErrorCategory::input, "BadQuality", std::string(text),
              "quality must be 'preview' or 'full', got '" + std::string(text) + "'");
}

namespace {

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string num(double v) { return fmt::format("{}", v); }
std::string rate_percent(double v) { return fmt::format("{:.6f}", v); }

}  // namespace

std::string metrics_csv(const MetricsBundle& m) {
  std::string out =
      "cyst_id,organoid_id,frame,time_h,present,area_px,area_um2,perimeter_um,circularity,centroid_x,centroid_y,"
      "unreliable\n";
  for (const CystRecord& r : m.records)
    for (const CystFrame& f : r.frames) {
      out += fmt::format("{},{},{},{},{}", csv_field(r.cyst_id), csv_field(r.organoid_id), f.frame, num(f.time_h),
                         f.present() ? "true" : "false");
      if (f.present()) {
        const CystMeasure& c = *f.measure;
        out += fmt::format(",{},{},{},{},{},{},{}\n", c.area_px, num(c.area_um2), num(c.perimeter_um),
                           num(c.circularity), num(c.centroid_x), num(c.centroid_y), c.unreliable ? "true" : "false");
      } else {
        out += ",,,,,,,\n";
      }
    }
  return out;
}

std::string population_csv(const MetricsBundle& m) {
  const PopulationSeries& p = m.population;
  std::string out = "frame,time_h,formation_rate_percent,cyst_density,n_organoids_with_cysts,n_total_cysts\n";
  for (std::size_t f = 0; f < p.time_h.size(); ++f)
    out += fmt::format("{},{},{},{},{},{}\n", f, num(p.time_h[f]), rate_percent(p.formation_rate_percent[f]),
                       num(p.cyst_density[f]), p.n_organoids_with_cysts[f], p.n_total_cysts[f]);
  return out;
}

std::string growth_csv(const MetricsBundle& m) {
  std::string out = "cyst_id,overall_growth_rate,phenotype,heatmap_row\n";
  for (const GrowthRow& g : m.growth.rows)
    out += fmt::format("{},{},{},{}\n", csv_field(g.cyst_id), g.rate ? num(*g.rate) : "",
                       g.phenotype ? to_string(*g.phenotype) : "", g.heatmap_row);
  return out;
}

json metrics_json(const MetricsBundle& m) {
  json cysts = json::array();
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const CystRecord& r = m.records[i];
    const GrowthRow& g = m.growth.rows[i];
    json frames = json::array();
    for (const CystFrame& f : r.frames) {
      json jf = {{"frame", f.frame}, {"time_h", f.time_h}, {"present", f.present()}};
      if (f.present()) {
        const CystMeasure& c = *f.measure;
        jf["area_px"] = c.area_px;
        jf["area_um2"] = c.area_um2;
        jf["perimeter_um"] = c.perimeter_um;
        jf["circularity"] = c.circularity;
        jf["centroid"] = {c.centroid_x, c.centroid_y};
        jf["unreliable"] = c.unreliable;
      }
      frames.push_back(std::move(jf));
    }
    cysts.push_back({{"cyst_id", r.cyst_id},
                     {"organoid_id", r.organoid_id},
                     {"formation_frame", m.formation_frames[i] >= 0 ? json(m.formation_frames[i]) : json(nullptr)},
                     {"overall_growth_rate", g.rate ? json(*g.rate) : json(nullptr)},
                     {"phenotype", g.phenotype ? json(to_string(*g.phenotype)) : json(nullptr)},
                     {"heatmap_row", g.heatmap_row},
                     {"frames", std::move(frames)}});
  }
  const PopulationSeries& p = m.population;
  json heatmap = json::array();
  for (int idx : m.growth.heatmap_order) heatmap.push_back(m.records[std::size_t(idx)].cyst_id);
  json correlation = json::array();
  for (const CorrelationRow& c : m.correlation)
    correlation.push_back({{"time_h", c.time_h}, {"circularity", c.circularity}, {"area_um2", c.area_um2},
                           {"cyst_id", c.cyst_id}});
  return {{"n_total_organoids", p.n_total_organoids},
          {"population",
           {{"time_h", p.time_h},
            {"formation_rate_percent", p.formation_rate_percent},
            {"cyst_density", p.cyst_density},
            {"n_organoids_with_cysts", p.n_organoids_with_cysts},
            {"n_total_cysts", p.n_total_cysts}}},
          {"growth",
           {{"p33", m.growth_defined ? json(m.growth.p33) : json(nullptr)},
            {"p67", m.growth_defined ? json(m.growth.p67) : json(nullptr)},
            {"heatmap_order", heatmap}}},
          {"cysts", cysts},
          {"correlation", correlation}};
}

std::vector<fs::path> write_tables(const MetricsBundle& m, const fs::path& dir) {
  const std::vector<std::pair<const char*, std::string>> files = {{"metrics.csv", metrics_csv(m)},
                                                                  {"population.csv", population_csv(m)},
                                                                  {"growth.csv", growth_csv(m)},
                                                                  {"metrics.json", metrics_json(m).dump(2) + "\n"}};
  std::vector<fs::path> out;
  for (const auto& [name, text] : files) {
    io::write_file(dir / name, text);
    out.push_back(dir / name);
  }
  return out;
}

Rgb palette_color(int cyst_index) {
  // matplotlib tab10
  static constexpr Rgb kTab10[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},  {148, 103, 189},
                                   {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207}};
  const int n = int(std::size(kTab10));
  return kTab10[((cyst_index % n) + n) % n];
}

std::uint8_t blend_channel(std::uint8_t src, std::uint8_t color) {
  // Integer form of round(0.55 * src + 0.45 * color); halves round up.
  return std::uint8_t((55 * int(src) + 45 * int(color) + 50) / 100);
}

std::vector<Gray8> display_frames(const FrameSequence& frames) {
  std::vector<Gray8> out;
  out.reserve(frames.frames.size());
  if (frames.bit_depth <= 8) {
    for (const Frame& f : frames.frames) out.push_back(f.min(std::uint16_t(255)).cast<std::uint8_t>());
    return out;
  }
  std::uint16_t lo = 65535, hi = 0;
  for (const Frame& f : frames.frames) {
    lo = std::min(lo, f.minCoeff());
    hi = std::max(hi, f.maxCoeff());
  }
  const double span = hi > lo ? double(hi - lo) : 1.0;
  for (const Frame& f : frames.frames)
    out.push_back(((f.cast<double>() - double(lo)) * (255.0 / span)).round().cast<std::uint8_t>());
  return out;
}

RgbImage gray_to_rgb(const Gray8& gray) {
  RgbImage img;
  for (Gray8& p : img.planes) p = gray;
  return img;
}

RgbImage overlay_image(const Gray8& gray, const TrackResult& track, int frame) {
  RgbImage img = gray_to_rgb(gray);
  for (const CystTrack& ct : track.cysts) {
    const std::optional<BinaryMask>& m = ct.masks.at(std::size_t(frame));
    if (!m) continue;
    const Rgb c = palette_color(ct.cyst_index);
    const std::uint8_t rgb[3] = {c.r, c.g, c.b};
    for (Eigen::Index y = 0; y < m->rows(); ++y)
      for (Eigen::Index x = 0; x < m->cols(); ++x)
        if ((*m)(y, x))
          for (int ch = 0; ch < 3; ++ch) img.planes[ch](y, x) = blend_channel(img.planes[ch](y, x), rgb[ch]);
  }
  return img;
}

RgbImage mask_image(const TrackResult& track, int frame) {
  RgbImage img(track.width, track.height);
  for (const CystTrack& ct : track.cysts) {
    const std::optional<BinaryMask>& m = ct.masks.at(std::size_t(frame));
    if (!m) continue;
    const Rgb c = palette_color(ct.cyst_index);
    img.planes[0] = m->select(Gray8::Constant(m->rows(), m->cols(), c.r), img.planes[0]);
    img.planes[1] = m->select(Gray8::Constant(m->rows(), m->cols(), c.g), img.planes[1]);
    img.planes[2] = m->select(Gray8::Constant(m->rows(), m->cols(), c.b), img.planes[2]);
  }
  return img;
}

RgbImage side_by_side_image(const Gray8& gray, const RgbImage& overlay) {
  const Eigen::Index h = gray.rows(), w = gray.cols();
  RgbImage img(int(2 * w), int(h));
  for (int ch = 0; ch < 3; ++ch) {
    img.planes[ch].leftCols(w) = gray;
    img.planes[ch].rightCols(w) = overlay.planes[ch];
  }
  return img;
}

RgbImage downscale(const RgbImage& image, int factor) {
  if (factor <= 1) return image;
  const int w = std::max(1, image.width() / factor), h = std::max(1, image.height() / factor);
  RgbImage out(w, h);
  for (int ch = 0; ch < 3; ++ch)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const auto block = image.planes[ch].block(y * factor, x * factor, std::min(factor, image.height() - y * factor),
                                                  std::min(factor, image.width() - x * factor));
        const int n = int(block.size());
        out.planes[ch](y, x) = std::uint8_t((block.cast<int>().sum() + n / 2) / n);
      }
  return out;
}

int preview_factor(int width, int height, Quality quality) {
  if (quality == Quality::full) return 1;
  const int long_edge = std::max(width, height);
  return std::max(1, (long_edge + 511) / 512);
}

namespace {

constexpr const char* kSequences[] = {"overlay", "masks", "side_by_side"};

}  // namespace

std::vector<fs::path> render_overlays(const FrameSequence& frames, const TrackResult& track, const fs::path& dir,
                                      Quality quality) {
  const std::vector<Gray8> gray = display_frames(frames);
  const int factor = preview_factor(frames.width(), frames.height(), quality);
  std::vector<RgbImage> seq[3];
  for (int f = 0; f < frames.size(); ++f) {
    const RgbImage over = overlay_image(gray[std::size_t(f)], track, f);
    seq[0].push_back(downscale(over, factor));
    seq[1].push_back(downscale(mask_image(track, f), factor));
    seq[2].push_back(downscale(side_by_side_image(gray[std::size_t(f)], over), factor));
  }
  std::vector<fs::path> out;
  for (int s = 0; s < 3; ++s) {
    const fs::path sub = dir / "overlays" / kSequences[s];
    std::error_code ec;
    fs::create_directories(sub, ec);
    if (ec) throw IoError(ErrorCategory::output, sub.string(), "cannot create " + sub.string() + ": " + ec.message());
    for (std::size_t f = 0; f < seq[s].size(); ++f) {
      const fs::path p = sub / io::frame_file_name(int(f));
      io::write_file(p, io::encode_png(seq[s][f]));
      out.push_back(p);
    }
    const fs::path anim = dir / "overlays" / (std::string(kSequences[s]) + ".apng");
    io::write_file(anim, io::encode_apng(seq[s], kAnimationDelayMs));
    out.push_back(anim);
  }
  return out;
}

namespace {

Artifact file_artifact(const fs::path& root, const std::string& rel, const std::string& kind) {
  const fs::path p = root / rel;
  if (!fs::is_regular_file(p)) throw IoError(ErrorCategory::output, p.string(), "report artifact missing: " + p.string());
  const std::vector<std::uint8_t> bytes = io::read_file(p);
  return {rel, kind, io::sha256_hex(bytes), bytes.size(), {}};
}

}  // namespace

std::vector<Artifact> collect_artifacts(const fs::path& dir) {
  std::vector<Artifact> out;
  for (const char* t : {"metrics.csv", "population.csv", "growth.csv", "metrics.json"})
    out.push_back(file_artifact(dir, t, "table"));
  for (const char* p : {"areas", "circularity", "scatter", "heatmap"})
    out.push_back(file_artifact(dir, std::string("plots/") + p + ".svg", "plot"));
  for (const char* s : kSequences) {
    const fs::path sub = dir / "overlays" / s;
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& e : fs::directory_iterator(sub, ec))
      if (e.is_regular_file() && io::is_frame_file_name(e.path().filename().string()))
        names.push_back(e.path().filename().string());
    if (ec || names.empty())
      throw IoError(ErrorCategory::output, sub.string(), "report image sequence missing: " + sub.string());
    std::sort(names.begin(), names.end());
    Artifact a{std::string("overlays/") + s + "/", "image_sequence", {}, 0, {}};
    std::string joined;
    for (const std::string& n : names) {
      const Artifact f = file_artifact(dir, a.path + n, "image");
      a.files.emplace_back(f.path, f.sha256);
      a.bytes += f.bytes;
      joined += f.sha256 + "  " + f.path + "\n";
    }
    a.sha256 = io::sha256_hex(joined);
    out.push_back(std::move(a));
  }
  for (const char* s : kSequences) out.push_back(file_artifact(dir, std::string("overlays/") + s + ".apng", "animation"));
  return out;
}

json build_manifest(const std::vector<Artifact>& artifacts, const ReportContext& ctx) {
  json list = json::array();
  for (const Artifact& a : artifacts) {
    json j = {{"path", a.path}, {"kind", a.kind}, {"sha256", a.sha256}, {"bytes", a.bytes}};
    if (!a.files.empty()) {
      json files = json::array();
      for (const auto& [path, hash] : a.files) files.push_back({{"path", path}, {"sha256", hash}});
      j["files"] = std::move(files);
    }
    list.push_back(std::move(j));
  }
  return {{"tool", "cystrack"},
          {"versions", library_versions()},
          {"generated_at", ctx.generated_at},
          {"backend", ctx.backend},
          {"quality", to_string(ctx.quality)},
          {"params", ctx.params},
          {"inputs", ctx.inputs},
          {"warnings", ctx.warnings},
          {"artifacts", std::move(list)}};
}

json write_report(const MetricsBundle& metrics, const FrameSequence& frames, const TrackResult& track,
                  const ReportContext& ctx, const fs::path& dir) {
  write_tables(metrics, dir);
  render_plots(metrics, dir);
  render_overlays(frames, track, dir, ctx.quality);
  const json manifest = build_manifest(collect_artifacts(dir), ctx);
  io::write_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

}  // namespace cystrack
