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
#include "cystrack/tracking.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cystrack {

/// Measurements of one cyst on one frame where it is present.
struct CystMeasure {
  std::int64_t area_px = 0;
  double area_um2 = 0.0;
  double perimeter_um = 0.0;
  double circularity = 0.0;
  double centroid_x = 0.0;
  double centroid_y = 0.0;
  bool unreliable = false;
  bool operator==(const CystMeasure&) const = default;
};

struct CystFrame {
  int frame = 0;
  double time_h = 0.0;
  std::optional<CystMeasure> measure;  // nullopt where the cyst is absent

  bool present() const { return measure.has_value(); }
  bool operator==(const CystFrame&) const = default;
};

struct CystRecord {
  int cyst_index = 0;
  int organoid_index = 0;
  std::string cyst_id;
  std::string organoid_id;
  std::vector<CystFrame> frames;  // chronological, one per video frame
  bool operator==(const CystRecord&) const = default;
};

/// Pixel count to square micrometres.
inline double area_um2(std::int64_t area_px, double um_per_pixel) {
  return double(area_px) * (um_per_pixel * um_per_pixel);
}

std::vector<CystRecord> cyst_records(const TrackResult& track, const ValidatedSession& session,
                                     ComponentPolicy policy = ComponentPolicy::largest);

struct PopulationSeries {
  int n_total_organoids = 0;
  std::vector<double> time_h;
  std::vector<int> n_organoids_with_cysts;
  std::vector<int> n_total_cysts;
  std::vector<double> formation_rate_percent;
  std::vector<double> cyst_density;
};

/// Formation rate (percent of organoids with at least one present cyst)
/// and cyst density (present cysts per organoid) on every frame.
PopulationSeries population_series(const std::vector<CystRecord>& records, const ValidatedSession& session);

/// Mean of consecutive (dA/dt) over the frames where the cyst is present;
/// nullopt when it is present on fewer than two frames.
std::optional<double> overall_growth_rate(const CystRecord& record);

enum class Phenotype { fast, medium, slow };
const char* to_string(Phenotype p);

struct GrowthRow {
  int cyst_index = 0;
  std::string cyst_id;
  std::optional<double> rate;           // um^2 / hour
  std::optional<Phenotype> phenotype;   // nullopt when the rate is undefined
  int heatmap_row = 0;
};

struct GrowthSummary {
  double p33 = 0.0;
  double p67 = 0.0;
  std::vector<GrowthRow> rows;  // in cyst order
  std::vector<int> heatmap_order;  // cyst indices, top row first
};

/// Linear-interpolated percentile (0..100) of `values`, which must be
/// non-empty.
double percentile(std::vector<double> values, double pct);

/// Classifies cysts by growth rate against the 33rd/67th percentiles of the
/// defined rates (fast: rate >= P67, slow: rate <= P33; when the two
/// percentiles coincide the comparisons become strict). Heatmap rows run by
/// rate descending, ties by cyst index, undefined rates last.
/// Throws Error("NoDefinedRates") when no cyst has a defined rate.
GrowthSummary growth_summary(const std::vector<CystRecord>& records);

struct CorrelationRow {
  double time_h = 0.0;
  double circularity = 0.0;
  double area_um2 = 0.0;
  int cyst_index = 0;
  std::string cyst_id;
};

/// One row per (cyst, present frame): the circularity-area-time scatter.
std::vector<CorrelationRow> correlation_table(const std::vector<CystRecord>& records);

/// Everything a report needs, computed once.
struct MetricsBundle {
  std::vector<CystRecord> records;
  PopulationSeries population;
  GrowthSummary growth;
  bool growth_defined = false;  // false when no cyst has a defined rate; rows then keep cyst order
  std::vector<CorrelationRow> correlation;
  std::vector<int> formation_frames;  // per record; -1 when never present
};

MetricsBundle compute_metrics(const TrackResult& track, const ValidatedSession& session,
                              ComponentPolicy policy = ComponentPolicy::largest);

}  // namespace cystrack
