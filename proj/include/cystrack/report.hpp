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

#include "cystrack/image.hpp"
#include "cystrack/metrics.hpp"
#include "cystrack/tracking.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cystrack {

enum class Quality { preview, full };
const char* to_string(Quality q);
/// Throws Error(input, "BadQuality").
Quality parse_quality(std::string_view text);

// Tables. Comma separated, header row, LF endings, absent values empty,
// doubles in shortest round-trip form except the formation rate (6 places).
std::string metrics_csv(const MetricsBundle& m);
std::string population_csv(const MetricsBundle& m);
std::string growth_csv(const MetricsBundle& m);
nlohmann::json metrics_json(const MetricsBundle& m);

/// Writes metrics.csv, population.csv, growth.csv and metrics.json. Returns
/// the written paths. Throws IoError(output).
std::vector<std::filesystem::path> write_tables(const MetricsBundle& m, const std::filesystem::path& dir);

// Plots, as standalone SVG documents.
std::string areas_svg(const MetricsBundle& m);
std::string circularity_svg(const MetricsBundle& m);
std::string scatter_svg(const MetricsBundle& m);
std::string heatmap_svg(const MetricsBundle& m);

/// Writes plots/{areas,circularity,scatter,heatmap}.svg under `dir`.
std::vector<std::filesystem::path> render_plots(const MetricsBundle& m, const std::filesystem::path& dir);

/// Stable colour of the cyst with dense index `cyst_index`.
Rgb palette_color(int cyst_index);

/// round(0.55 * src + 0.45 * color), per channel.
std::uint8_t blend_channel(std::uint8_t src, std::uint8_t color);

/// Display mapping of a sequence to 8-bit gray: 8-bit sources pass through,
/// deeper sources are min-max stretched over the whole sequence.
std::vector<Gray8> display_frames(const FrameSequence& frames);

RgbImage gray_to_rgb(const Gray8& gray);
/// `gray` with every present cyst blended in its palette colour; later cysts
/// blend over earlier ones where masks overlap.
RgbImage overlay_image(const Gray8& gray, const TrackResult& track, int frame);
/// Cyst masks in palette colours on black.
RgbImage mask_image(const TrackResult& track, int frame);
/// Gray source on the left, overlay on the right.
RgbImage side_by_side_image(const Gray8& gray, const RgbImage& overlay);
/// Box-filter downscale by an integer factor (>= 1).
RgbImage downscale(const RgbImage& image, int factor);
/// 1 for full quality; otherwise the smallest factor that brings the long
/// edge to at most 512 pixels.
int preview_factor(int width, int height, Quality quality);

constexpr int kAnimationDelayMs = 500;

/// Writes overlays/{overlay,masks,side_by_side}/frame_NNNN.png and the
/// matching overlays/<name>.apng animations.
std::vector<std::filesystem::path> render_overlays(const FrameSequence& frames, const TrackResult& track,
                                                   const std::filesystem::path& dir, Quality quality);

/// One manifest entry. Image sequences are a single artifact whose hash
/// covers the per-file hashes in order.
struct Artifact {
  std::string path;  // relative, '/' separated; directories end with '/'
  std::string kind;  // table | plot | image_sequence | animation
  std::string sha256;
  std::uintmax_t bytes = 0;
  std::vector<std::pair<std::string, std::string>> files;  // sequences only: (relative path, sha256)
};

/// The fixed report layout: 4 tables, 4 plots, 3 image sequences and 3
/// animations. Hashes the files found under `dir`; throws IoError(output)
/// when one is missing.
std::vector<Artifact> collect_artifacts(const std::filesystem::path& dir);

struct ReportContext {
  std::string backend;
  Quality quality = Quality::full;
  nlohmann::json params = nlohmann::json::object();
  nlohmann::json inputs = nlohmann::json::object();
  std::vector<std::string> warnings;
  std::string generated_at;  // excluded from determinism comparisons
};

nlohmann::json build_manifest(const std::vector<Artifact>& artifacts, const ReportContext& ctx);

/// Writes tables, plots, overlays and manifest.json into `dir` (which must
/// exist). Returns the manifest.
nlohmann::json write_report(const MetricsBundle& metrics, const FrameSequence& frames, const TrackResult& track,
                            const ReportContext& ctx, const std::filesystem::path& dir);

}  // namespace cystrack
