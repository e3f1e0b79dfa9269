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

#include "cystrack/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace cystrack {

std::vector<CystRecord> cyst_records(const TrackResult& track, const ValidatedSession& session, ComponentPolicy policy) {
  const double um = session.calibration().um_per_pixel;
  const std::vector<double>& times = session.timestamps();
  std::vector<CystRecord> out;
  out.reserve(track.cysts.size());
  for (const CystTrack& ct : track.cysts) {
    const CystRef& ref = session.cysts().at(std::size_t(ct.cyst_index));
    CystRecord rec;
    rec.cyst_index = ref.index;
    rec.organoid_index = ref.organoid_index;
    rec.cyst_id = ref.cyst_id;
    rec.organoid_id = ref.organoid_id;
    for (std::size_t f = 0; f < ct.masks.size(); ++f) {
      CystFrame cf;
      cf.frame = int(f);
      cf.time_h = times.at(f);
      if (ct.masks[f]) {
        const Morphometry m = morphometry(*ct.masks[f], policy);
        CystMeasure cm;
        cm.area_px = m.area_px;
        cm.area_um2 = area_um2(m.area_px, um);
        cm.perimeter_um = m.perimeter_px * um;
        cm.circularity = m.circularity;
        cm.centroid_x = m.centroid.x();
        cm.centroid_y = m.centroid.y();
        cm.unreliable = m.unreliable;
        cf.measure = cm;
      }
      rec.frames.push_back(cf);
    }
    out.push_back(std::move(rec));
  }
  return out;
}

PopulationSeries population_series(const std::vector<CystRecord>& records, const ValidatedSession& session) {
  PopulationSeries s;
  s.n_total_organoids = session.organoid_count();
  s.time_h = session.timestamps();
  const double n = double(s.n_total_organoids);
  for (std::size_t f = 0; f < s.time_h.size(); ++f) {
    std::set<int> organoids;
    int cysts = 0;
    for (const CystRecord& r : records)
      if (f < r.frames.size() && r.frames[f].present()) {
        organoids.insert(r.organoid_index);
        ++cysts;
      }
    s.n_organoids_with_cysts.push_back(int(organoids.size()));
    s.n_total_cysts.push_back(cysts);
    s.formation_rate_percent.push_back(100.0 * double(organoids.size()) / n);
    s.cyst_density.push_back(double(cysts) / n);
  }
  return s;
}

std::optional<double> overall_growth_rate(const CystRecord& record) {
  std::vector<const CystFrame*> present;
  for (const CystFrame& f : record.frames)
    if (f.present()) present.push_back(&f);
  if (present.size() < 2) return std::nullopt;
  double sum = 0.0;
  for (std::size_t i = 0; i + 1 < present.size(); ++i)
    sum += (present[i + 1]->measure->area_um2 - present[i]->measure->area_um2) /
           (present[i + 1]->time_h - present[i]->time_h);
  return sum / double(present.size() - 1);
}

const char* to_string(Phenotype p) {
  switch (p) {
    case Phenotype::fast: return "fast";
    case Phenotype::medium: return "medium";
    case Phenotype::slow: return "slow";
  }
  return "medium";
}

double percentile(std::vector<double> values, double pct) {
  std::sort(values.begin(), values.end());
  const double pos = pct / 100.0 * double(values.size() - 1);
  const std::size_t lo = std::size_t(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - double(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

GrowthSummary growth_summary(const std::vector<CystRecord>& records) {
  GrowthSummary g;
  std::vector<double> defined;
  for (const CystRecord& r : records) {
    GrowthRow row;
    row.cyst_index = r.cyst_index;
    row.cyst_id = r.cyst_id;
    row.rate = overall_growth_rate(r);
    if (row.rate) defined.push_back(*row.rate);
    g.rows.push_back(row);
  }
  if (defined.empty())
    throw Error(ErrorCategory::input, "NoDefinedRates", "", "no cyst is present on two or more frames");

  g.p33 = percentile(defined, 33.0);
  g.p67 = percentile(defined, 67.0);
  const bool degenerate = g.p33 == g.p67;
  for (GrowthRow& row : g.rows) {
    if (!row.rate) continue;
    const double v = *row.rate;
    const bool fast = degenerate ? v > g.p67 : v >= g.p67;
    const bool slow = degenerate ? v < g.p33 : v <= g.p33;
    row.phenotype = fast ? Phenotype::fast : slow ? Phenotype::slow : Phenotype::medium;
  }

  std::vector<std::size_t> order(g.rows.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const GrowthRow& ra = g.rows[a];
    const GrowthRow& rb = g.rows[b];
    if (ra.rate.has_value() != rb.rate.has_value()) return ra.rate.has_value();
    if (ra.rate && *ra.rate != *rb.rate) return *ra.rate > *rb.rate;
    return ra.cyst_index < rb.cyst_index;
  });
  for (std::size_t i = 0; i < order.size(); ++i) {
    g.rows[order[i]].heatmap_row = int(i);
    g.heatmap_order.push_back(g.rows[order[i]].cyst_index);
  }
  return g;
}

std::vector<CorrelationRow> correlation_table(const std::vector<CystRecord>& records) {
  std::vector<CorrelationRow> rows;
  for (const CystRecord& r : records)
    for (const CystFrame& f : r.frames)
      if (f.present())
        rows.push_back({f.time_h, f.measure->circularity, f.measure->area_um2, r.cyst_index, r.cyst_id});
  return rows;
}

MetricsBundle compute_metrics(const TrackResult& track, const ValidatedSession& session, ComponentPolicy policy) {
  MetricsBundle b;
  b.records = cyst_records(track, session, policy);
  b.population = population_series(b.records, session);
  b.correlation = correlation_table(b.records);
  for (const CystRecord& r : b.records) {
    int first = -1;
    for (const CystFrame& f : r.frames)
      if (f.present()) {
        first = f.frame;
        break;
      }
    b.formation_frames.push_back(first);
  }
  const bool any_rate = std::any_of(b.records.begin(), b.records.end(),
                                    [](const CystRecord& r) { return overall_growth_rate(r).has_value(); });
  if (any_rate) {
    b.growth = growth_summary(b.records);
    b.growth_defined = true;
  } else {
    for (std::size_t i = 0; i < b.records.size(); ++i) {
      b.growth.rows.push_back({b.records[i].cyst_index, b.records[i].cyst_id, std::nullopt, std::nullopt, int(i)});
      b.growth.heatmap_order.push_back(b.records[i].cyst_index);
    }
  }
  return b;
}

}  // namespace cystrack
