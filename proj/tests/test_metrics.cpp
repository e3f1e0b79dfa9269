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
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace cystrack;

namespace {

AnnotationSession session_with(int organoids, const std::vector<int>& cyst_owner, int frames, double um = 1.0,
                               double hours = 0.0) {
  AnnotationSession s;
  s.frame_width = 64;
  s.frame_height = 64;
  s.annotated_frame_index = frames - 1;
  s.calibration = {um, hours > 0 ? hours : double(frames - 1), frames, std::nullopt};
  for (int o = 0; o < organoids; ++o) s.organoids.push_back({"o" + std::to_string(o), 1.0 + o, 1.0, {}});
  for (std::size_t c = 0; c < cyst_owner.size(); ++c) {
    const int x = int(c % 8) * 8, y = int(c / 8) * 8;
    s.organoids[std::size_t(cyst_owner[c])].cysts.push_back({"c" + std::to_string(c), {x, y, x + 4, y + 4}});
  }
  return s;
}

// A record with the given areas on consecutive frames (nullopt = absent).
CystRecord record_with_areas(int index, const std::vector<std::optional<double>>& areas, double dt = 1.0) {
  CystRecord r;
  r.cyst_index = index;
  r.cyst_id = "c" + std::to_string(index);
  for (std::size_t f = 0; f < areas.size(); ++f) {
    CystFrame cf{int(f), double(f) * dt, std::nullopt};
    if (areas[f]) cf.measure = CystMeasure{0, *areas[f], 0, 1, 0, 0, false};
    r.frames.push_back(cf);
  }
  return r;
}

}  // namespace

TEST_CASE("area conversion is the product with the squared scale") {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<std::int64_t> px(0, 5'000'000);
  std::uniform_real_distribution<double> um(0.01, 20.0);
  for (int i = 0; i < 1000; ++i) {
    const std::int64_t a = px(rng);
    const double s = um(rng);
    const double want = double(a) * (s * s);
    CHECK(area_um2(a, s) == want);
  }
}

TEST_CASE("cyst records measure present frames only") {
  const ValidatedSession v = validate(session_with(1, {0}, 3, 0.5, 10.0));
  TrackResult tr;
  tr.width = tr.height = 64;
  tr.frame_count = 3;
  CystTrack ct;
  ct.masks = {std::nullopt, box_mask(64, 64, {10, 10, 20, 20}), box_mask(64, 64, {10, 10, 30, 20})};
  ct.formation_frame = 1;
  tr.cysts.push_back(ct);

  const std::vector<CystRecord> recs = cyst_records(tr, v);
  REQUIRE(recs.size() == 1);
  const CystRecord& r = recs[0];
  CHECK(r.cyst_id == "c0");
  CHECK(r.organoid_id == "o0");
  REQUIRE(r.frames.size() == 3);
  CHECK_FALSE(r.frames[0].present());
  CHECK(r.frames[1].time_h == 5.0);
  const CystMeasure& m = *r.frames[2].measure;
  CHECK(m.area_px == 200);
  CHECK(m.area_um2 == 200 * (0.5 * 0.5));
  CHECK(m.centroid_x == doctest::Approx(19.5));
  CHECK(m.centroid_y == doctest::Approx(14.5));
  const Morphometry raw = morphometry(*ct.masks[2]);
  CHECK(m.perimeter_um == raw.perimeter_px * 0.5);
  CHECK(m.circularity == raw.circularity);
}

TEST_CASE("population series counts organoids with a present cyst") {
  // 4 organoids; organoid 0 holds two cysts, organoid 2 one, 1 and 3 none.
  const ValidatedSession v = validate(session_with(4, {0, 0, 2}, 3));
  std::vector<CystRecord> recs{
      record_with_areas(0, {10.0, 20.0, 30.0}),
      record_with_areas(1, {std::nullopt, std::nullopt, 5.0}),
      record_with_areas(2, {std::nullopt, 8.0, 9.0}),
  };
  recs[1].organoid_index = 0;
  recs[2].organoid_index = 2;
  const PopulationSeries p = population_series(recs, v);
  CHECK(p.n_total_organoids == 4);
  CHECK(p.n_organoids_with_cysts == std::vector<int>{1, 2, 2});
  CHECK(p.n_total_cysts == std::vector<int>{1, 2, 3});
  CHECK(p.formation_rate_percent == std::vector<double>{1.0 / 4 * 100, 2.0 / 4 * 100, 2.0 / 4 * 100});
  CHECK(p.cyst_density == std::vector<double>{0.25, 0.5, 0.75});
  CHECK(p.time_h == std::vector<double>{0, 1, 2});
}

TEST_CASE("overall growth rate") {
  CHECK(*overall_growth_rate(record_with_areas(0, {100.0, 200.0, 400.0})) == 150.0);
  CHECK(*overall_growth_rate(record_with_areas(0, {50.0, 50.0, 50.0, 50.0})) == 0.0);
  CHECK(*overall_growth_rate(record_with_areas(0, {std::nullopt, 10.0, 40.0}, 2.0)) == 15.0);
  CHECK_FALSE(overall_growth_rate(record_with_areas(0, {std::nullopt, std::nullopt, 40.0})).has_value());
  CHECK(*overall_growth_rate(record_with_areas(0, {400.0, 100.0})) == -300.0);
}

TEST_CASE("percentile matches the hand-written oracle") {
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> v(std::size_t(1 + t % 17));
    for (double& x : v) x = u(rng);
    for (double p : {0.0, 33.0, 50.0, 67.0, 100.0}) CHECK(percentile(v, p) == doctest::Approx(oracle::percentile(v, p)));
  }
  CHECK(percentile({1, 2, 3, 4}, 50) == 2.5);
  CHECK(percentile({7}, 33) == 7);
}

TEST_CASE("growth summary splits nine rates three ways") {
  const std::vector<double> rates{12, -5, 80, 7, 35, 2, 20, 50, 10};
  std::vector<CystRecord> recs;
  for (std::size_t i = 0; i < rates.size(); ++i) recs.push_back(record_with_areas(int(i), {1000.0, 1000.0 + rates[i]}));
  const GrowthSummary g = growth_summary(recs);
  CHECK(g.p33 == doctest::Approx(oracle::percentile(rates, 33)));
  CHECK(g.p67 == doctest::Approx(oracle::percentile(rates, 67)));
  int fast = 0, medium = 0, slow = 0;
  for (const GrowthRow& r : g.rows) {
    REQUIRE(r.phenotype.has_value());
    fast += *r.phenotype == Phenotype::fast;
    medium += *r.phenotype == Phenotype::medium;
    slow += *r.phenotype == Phenotype::slow;
  }
  CHECK(fast == 3);
  CHECK(medium == 3);
  CHECK(slow == 3);
  CHECK(*g.rows[2].phenotype == Phenotype::fast);
  CHECK(*g.rows[1].phenotype == Phenotype::slow);
  CHECK(*g.rows[0].phenotype == Phenotype::medium);

  REQUIRE(g.heatmap_order.size() == 9);
  CHECK(g.heatmap_order == std::vector<int>{2, 7, 4, 6, 0, 8, 3, 5, 1});
  for (const GrowthRow& r : g.rows) CHECK(g.heatmap_order[std::size_t(r.heatmap_row)] == r.cyst_index);
}

TEST_CASE("growth summary edge cases") {
  // Undefined rates go last and carry no phenotype.
  std::vector<CystRecord> recs{record_with_areas(0, {std::nullopt, 5.0}), record_with_areas(1, {1.0, 3.0}),
                               record_with_areas(2, {1.0, 3.0})};
  GrowthSummary g = growth_summary(recs);
  CHECK(g.heatmap_order == std::vector<int>{1, 2, 0});
  CHECK_FALSE(g.rows[0].phenotype.has_value());
  // Equal percentiles: strict comparisons leave every cyst medium.
  CHECK(*g.rows[1].phenotype == Phenotype::medium);
  CHECK(*g.rows[2].phenotype == Phenotype::medium);

  try {
    growth_summary({record_with_areas(0, {std::nullopt, 5.0})});
    FAIL("expected NoDefinedRates");
  } catch (const Error& e) {
    CHECK(e.code() == "NoDefinedRates");
  }
  CHECK(std::string(to_string(Phenotype::fast)) == "fast");
}

TEST_CASE("correlation rows and bundle") {
  const ValidatedSession v = validate(session_with(2, {0, 1}, 3));
  TrackResult tr;
  tr.width = tr.height = 64;
  tr.frame_count = 3;
  const BinaryMask a = box_mask(64, 64, {0, 0, 4, 4});
  tr.cysts.push_back({0, {std::nullopt, a, a}, 1});
  tr.cysts.push_back({1, {std::nullopt, std::nullopt, box_mask(64, 64, {8, 0, 12, 4})}, 2});

  const MetricsBundle m = compute_metrics(tr, v);
  CHECK(m.correlation.size() == 3);
  CHECK(m.formation_frames == std::vector<int>{1, 2});
  CHECK(m.growth_defined);
  CHECK(m.population.n_total_cysts == std::vector<int>{0, 1, 2});
  CHECK(m.growth.rows.size() == 2);
  CHECK_FALSE(m.growth.rows[1].rate.has_value());
}
