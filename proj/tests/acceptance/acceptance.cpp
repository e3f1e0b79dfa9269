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

// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.
#include "cystrack/image_io.hpp"
#include "cystrack/metrics.hpp"
#include "cystrack/service.hpp"
#include "cystrack/synth.hpp"
#include "cystrack/tracking.hpp"
#include "mock_sidecar.hpp"
#include "oracles.hpp"
#include "support.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <numbers>
#include <random>
#include <set>

using namespace cystrack;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kSource = CYSTRACK_SOURCE_DIR;

struct Outcome {
  bool ok = true;
  std::string detail;
  void expect(bool cond, const std::string& what) {
    if (cond) return;
    if (ok) detail = what;
    ok = false;
  }
};

int failures = 0;

void criterion(const std::string& name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out.ok = false;
    out.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (out.ok && secs >= budget_s) {
    out.ok = false;
    out.detail = fmt::format("over budget of {} s", budget_s);
  }
  if (!out.ok) ++failures;
  fmt::print("{} {} ({:.2f} s){}\n", out.ok ? "PASS" : "FAIL", name, secs,
             out.detail.empty() ? "" : ": " + out.detail);
  std::fflush(stdout);
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-6; }

Outcome population_worked_example() {
  Outcome o;
  const Scenario sc = load_scenario(kSource / "tests/fixtures/population_scene.json");
  const SynthOutput gt = render(sc);
  const ValidatedSession session = validate(gt.session, sc.width, sc.height, sc.frame_count);
  o.expect(session.organoid_count() == 14 && session.cyst_count() == 7, "scene is not 14 organoids / 7 cysts");

  const auto check_series = [&](const PopulationSeries& p, const std::string& label) {
    o.expect(close(p.formation_rate_percent.front(), 7.142857), label + ": initial formation rate");
    o.expect(close(p.formation_rate_percent.back(), 42.857143), label + ": final formation rate");
    o.expect(close(p.cyst_density.front(), 0.071429), label + ": initial density");
    o.expect(close(p.cyst_density.back(), 0.5), label + ": final density");
  };
  check_series(population_series(cyst_records(gt.truth, session), session), "ground truth");

  BaselineBackend backend;
  const TrackResult tr = track(gt.frames, session, backend, {});
  const PopulationSeries p = population_series(cyst_records(tr, session), session);
  check_series(p, "tracked");
  if (o.ok)
    o.detail = fmt::format("formation {:.6f}% -> {:.6f}%, density {:.6f} -> {:.6f}", p.formation_rate_percent.front(),
                           p.formation_rate_percent.back(), p.cyst_density.front(), p.cyst_density.back());
  return o;
}

Outcome area_conversion() {
  Outcome o;
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> um(0.05, 5.0);
  std::uniform_int_distribution<int> side(2, 40), pos(0, 20);
  int cases = 0;
  for (int i = 0; i < 1000; ++i) {
    const double scale = um(rng);
    AnnotationSession s;
    s.frame_width = s.frame_height = 64;
    s.annotated_frame_index = 1;
    s.calibration = {scale, 1.0, 2, std::nullopt};
    // Boxes and disks alternate.
    const int x0 = pos(rng), y0 = pos(rng);
    const BinaryMask m = i % 2 ? box_mask(64, 64, {x0, y0, x0 + side(rng), y0 + side(rng)})
                               : rasterize_disk(64, 64, {x0 + 20.0, y0 + 20.0}, side(rng) / 2.0);
    const PixelBox box = bounding_box(m);
    s.organoids.push_back({"o", 1.0, 1.0, {{"c", box}}});
    const ValidatedSession v = validate(s);

    TrackResult tr;
    tr.width = tr.height = 64;
    tr.frame_count = 2;
    tr.cysts.push_back({0, {m, m}, 0});
    const std::vector<CystRecord> recs = cyst_records(tr, v);
    const oracle::Components cc = oracle::flood_fill(m);
    const std::int64_t px = (cc.labels.array() == 1).count();
    o.expect(cc.count == 1, fmt::format("case {}: fixture is not one component", i));
    for (const CystFrame& f : recs.at(0).frames) {
      o.expect(f.measure->area_px == px, fmt::format("case {}: pixel count", i));
      o.expect(f.measure->area_um2 == double(px) * (scale * scale), fmt::format("case {}: area not bit-exact", i));
    }
    ++cases;
  }
  if (o.ok) o.detail = fmt::format("{} cases bit-exact", cases);
  return o;
}

Outcome circularity_calibration() {
  Outcome o;
  double lo = 1.0, worst = 0.0;
  for (int r = 8; r <= 64; ++r) {
    const double c = r + 3.0;
    const BinaryMask disk = rasterize_disk(2 * r + 7, 2 * r + 7, {c, c}, double(r));
    const double got = morphometry(disk).circularity;
    const double want = oracle::circularity(disk);
    o.expect(got >= 0.9, fmt::format("r={}: circularity {:.4f} < 0.9", r, got));
    o.expect(std::abs(got - want) <= 0.02, fmt::format("r={}: {:.4f} vs oracle {:.4f}", r, got, want));
    lo = std::min(lo, got);
    worst = std::max(worst, std::abs(got - want));
  }
  for (int side = 14; side <= 110; side += 8) {
    const BinaryMask sq = box_mask(side + 6, side + 6, {3, 3, 3 + side, 3 + side});
    const double r = double(side) / std::sqrt(std::numbers::pi);
    const int n = int(2 * r) + 8;
    const BinaryMask disk = rasterize_disk(n, n, {r + 3.0, r + 3.0}, r);
    o.expect(morphometry(sq).circularity < morphometry(disk).circularity,
             fmt::format("square side {} not below its disk", side));
  }
  if (o.ok) o.detail = fmt::format("min {:.4f}, max oracle gap {:.4f}", lo, worst);
  return o;
}

Outcome tracking_suite() {
  Outcome o;
  const std::vector<std::string> names{"growth", "shrink_to_absent", "late_formation", "two_adjacent", "drift", "static"};
  double lowest = 1.0;
  int objects = 0;
  for (const std::string& name : names) {
    const Scenario sc = load_scenario(kSource / "data/scenarios" / (name + ".json"));
    const SynthOutput gt = render(sc);
    const ValidatedSession session = validate(gt.session, sc.width, sc.height, sc.frame_count);
    BaselineBackend backend;
    const TrackResult tr = track(gt.frames, session, backend, {});
    o.expect(tr.cysts.size() == gt.truth.cysts.size(), name + ": track count");
    for (std::size_t c = 0; c < tr.cysts.size() && c < gt.truth.cysts.size(); ++c) {
      const double m = testsupport::mean_iou(tr.cysts[c], gt.truth.cysts[c]);
      lowest = std::min(lowest, m);
      o.expect(m >= 0.9, fmt::format("{} object {}: mean IoU {:.4f}", name, c, m));
      o.expect(tr.cysts[c].formation_frame == gt.truth.cysts[c].formation_frame,
               fmt::format("{} object {}: formation {} vs {}", name, c, tr.cysts[c].formation_frame,
                           gt.truth.cysts[c].formation_frame));
      o.expect(testsupport::monotone(tr.cysts[c].masks), fmt::format("{} object {}: not monotone", name, c));
      ++objects;
    }
  }
  std::mt19937 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Timeline t = testsupport::random_timeline(rng);
    o.expect(testsupport::same(reverse_timeline(reverse_timeline(t)), t), "reverse_timeline is not an involution");
  }
  if (o.ok) o.detail = fmt::format("{} scenarios, {} objects, lowest mean IoU {:.4f}", names.size(), objects, lowest);
  return o;
}

CystRecord record_with_areas(int index, const std::vector<double>& areas) {
  CystRecord r;
  r.cyst_index = index;
  r.cyst_id = "c" + std::to_string(index);
  for (std::size_t f = 0; f < areas.size(); ++f)
    r.frames.push_back({int(f), double(f), CystMeasure{0, areas[f], 0, 1, 0, 0, false}});
  return r;
}

Outcome growth_summary_check() {
  Outcome o;
  const std::vector<double> rates{12, -5, 80, 7, 35, 2, 20, 50, 10};
  std::vector<CystRecord> recs;
  for (std::size_t i = 0; i < rates.size(); ++i) recs.push_back(record_with_areas(int(i), {1000.0, 1000.0 + rates[i]}));
  const GrowthSummary g = growth_summary(recs);
  std::map<Phenotype, int> counts;
  for (const GrowthRow& r : g.rows)
    if (r.phenotype) ++counts[*r.phenotype];
  o.expect(counts[Phenotype::fast] == 3 && counts[Phenotype::medium] == 3 && counts[Phenotype::slow] == 3,
           fmt::format("split {}/{}/{}", counts[Phenotype::fast], counts[Phenotype::medium], counts[Phenotype::slow]));
  o.expect(g.heatmap_order.size() == rates.size(), "heatmap row count");
  for (std::size_t i = 1; i < g.heatmap_order.size(); ++i)
    o.expect(rates[std::size_t(g.heatmap_order[i - 1])] >= rates[std::size_t(g.heatmap_order[i])],
             "heatmap rows increase somewhere");

  // Real masks at 1 um/px and 1 h spacing.
  AnnotationSession s;
  s.frame_width = s.frame_height = 64;
  s.annotated_frame_index = 2;
  s.calibration = {1.0, 2.0, 3, std::nullopt};
  s.organoids.push_back({"o", 1.0, 1.0, {{"grow", {0, 0, 20, 20}}, {"flat", {30, 30, 40, 40}}}});
  const ValidatedSession v = validate(s);
  TrackResult tr;
  tr.width = tr.height = 64;
  tr.frame_count = 3;
  tr.cysts.push_back({0, {box_mask(64, 64, {0, 0, 10, 10}), box_mask(64, 64, {0, 0, 20, 10}),
                          box_mask(64, 64, {0, 0, 20, 20})}, 0});
  const BinaryMask flat = box_mask(64, 64, {30, 30, 40, 40});
  tr.cysts.push_back({1, {flat, flat, flat}, 0});
  const std::vector<CystRecord> real = cyst_records(tr, v);
  const std::optional<double> growing = overall_growth_rate(real[0]);
  const std::optional<double> constant = overall_growth_rate(real[1]);
  o.expect(growing && *growing == 150.0, "[100,200,400] rate is not 150");
  o.expect(constant && *constant == 0.0, "constant-area rate is not 0");
  if (o.ok) o.detail = fmt::format("P33 {:.2f}, P67 {:.2f}, split 3/3/3", g.p33, g.p67);
  return o;
}

std::string slurp(const fs::path& p) {
  const std::vector<std::uint8_t> raw = io::read_file(p);
  return {raw.begin(), raw.end()};
}

std::set<std::string> files_under(const fs::path& root) {
  std::set<std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.insert(fs::relative(e.path(), root).generic_string());
  return out;
}

std::set<std::string> expected_layout(int frames) {
  std::set<std::string> out{"manifest.json", "metrics.csv", "population.csv", "growth.csv", "metrics.json",
                            "plots/areas.svg", "plots/circularity.svg", "plots/scatter.svg", "plots/heatmap.svg"};
  for (const char* s : {"overlay", "masks", "side_by_side"}) {
    out.insert(std::string("overlays/") + s + ".apng");
    for (int f = 0; f < frames; ++f) out.insert(std::string("overlays/") + s + "/" + io::frame_file_name(f));
  }
  return out;
}

Outcome end_to_end_determinism() {
  Outcome o;
  const fs::path root = testsupport::scratch_dir("acceptance-cli");
  const fs::path demo = kSource / "data/demo";
  ::setenv("SOURCE_DATE_EPOCH", "1700000000", 1);
  for (const char* run : {"a", "b"}) {
    const std::string cmd = fmt::format("\"{}\" --log-level warn run --frames \"{}\" --annotations \"{}\" --out \"{}\"",
                                        CYSTRACK_CLI, (demo / "frames").string(), (demo / "annotation.json").string(),
                                        (root / run).string());
    const int rc = std::system(cmd.c_str());
    o.expect(rc == 0, fmt::format("run {} exited with {}", run, rc));
  }
  ::unsetenv("SOURCE_DATE_EPOCH");
  if (!o.ok) return o;

  const std::set<std::string> layout = expected_layout(7);
  const std::set<std::string> a = files_under(root / "a"), b = files_under(root / "b");
  o.expect(a == layout, "run a does not match the report layout");
  o.expect(b == layout, "run b does not match the report layout");
  int compared = 0;
  for (const std::string& f : a) {
    const std::string ext = fs::path(f).extension().string();
    if (ext != ".csv" && ext != ".json" && ext != ".svg") continue;
    o.expect(b.count(f) && slurp(root / "a" / f) == slurp(root / "b" / f), f + " differs between runs");
    ++compared;
  }

  // Every report file is listed with a hash that verifies.
  const json m = json::parse(slurp(root / "a/manifest.json"));
  o.expect(m.at("artifacts").size() == 14, "manifest does not list 14 artifacts");
  std::set<std::string> covered{"manifest.json"};
  for (const json& art : m.at("artifacts")) {
    const std::string path = art.at("path");
    if (art.at("kind") == "image_sequence") {
      std::string joined;
      for (const json& f : art.at("files")) {
        const std::string fp = f.at("path");
        o.expect(io::sha256_hex(slurp(root / "a" / fp)) == f.at("sha256").get<std::string>(), fp + ": hash mismatch");
        joined += f.at("sha256").get<std::string>() + "  " + fp + "\n";
        covered.insert(fp);
      }
      o.expect(io::sha256_hex(joined) == art.at("sha256").get<std::string>(), path + ": sequence hash mismatch");
    } else {
      o.expect(io::sha256_hex(slurp(root / "a" / path)) == art.at("sha256").get<std::string>(), path + ": hash mismatch");
      covered.insert(path);
    }
  }
  o.expect(covered == a, "manifest does not cover every report file");
  if (o.ok) o.detail = fmt::format("{} files, {} text artifacts identical, manifest verified", a.size(), compared);
  fs::remove_all(root);
  return o;
}

std::map<std::string, std::string> artifact_hashes(const json& listing) {
  std::map<std::string, std::string> out;
  for (const json& a : listing.at("artifacts")) out[a.at("path")] = a.at("sha256");
  return out;
}

bool valid_path(const json& job) {
  const std::vector<std::string> s = job.at("transitions").get<std::vector<std::string>>();
  if (s.empty() || s.front() != "queued") return false;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const auto from = job_state_from_string(s[i - 1]), to = job_state_from_string(s[i]);
    if (!from || !to || !is_allowed_transition(*from, *to)) return false;
  }
  return s.back() == job.at("state").get<std::string>();
}

Outcome service_state_machine() {
  Outcome o;
  const fs::path dir = testsupport::scratch_dir("acceptance-service");
  const fs::path demo = kSource / "data/demo";
  const json annotation = json::parse(slurp(demo / "annotation.json"));
  testsupport::MockSidecar sidecar;
  {
    ServiceConfig cfg;
    cfg.data_dir = dir;
    cfg.workers = 0;
    cfg.remote_url = sidecar.url();
    Service svc(cfg);
    const std::string pid = svc.create_project("acceptance")["project_id"];
    svc.put_frames_from_directory(pid, demo / "frames");

    json bad = annotation;
    bad["organoids"][0]["cysts"][0]["bbox"] = {0, 0, 5000, 10};
    int status = 0;
    try {
      svc.put_annotation(pid, bad);
    } catch (const ServiceError& e) {
      status = e.status();
    }
    o.expect(status == 422, fmt::format("invalid annotation gave {}", status));
    svc.put_annotation(pid, annotation);

    // Random start / cancel / run sequences, half of them on the remote path.
    std::mt19937 rng(8);
    std::vector<std::string> jobs;
    for (int step = 0; step < 30; ++step) {
      switch (rng() % 4) {
        case 0: jobs.push_back(svc.start_job(pid, json::object())["job_id"]); break;
        case 1: jobs.push_back(svc.start_job(pid, {{"backend", "remote"}})["job_id"]); break;
        case 2:
          if (!jobs.empty()) {
            try {
              svc.cancel_job(jobs[rng() % jobs.size()]);
            } catch (const ServiceError&) {
            }
          }
          break;
        default: svc.run_next_job(); break;
      }
    }
    while (svc.run_next_job()) {
    }

    std::optional<std::map<std::string, std::string>> reference;
    int done = 0, cancelled = 0;
    bool remote_done = false;
    for (const std::string& id : jobs) {
      const json j = svc.job_status(id);
      o.expect(valid_path(j), "job " + id + " walked a forbidden edge");
      const std::string st = j.at("state");
      cancelled += st == "cancelled";
      if (st != "done") {
        o.expect(st == "cancelled", "job " + id + " ended " + st);
        continue;
      }
      ++done;
      remote_done |= j.at("backend") == "remote";
      const auto hashes = artifact_hashes(svc.list_artifacts(id));
      if (!reference) reference = hashes;
      o.expect(hashes == *reference, "job " + id + " report hashes differ");
    }
    o.expect(done >= 2 && remote_done, "too few finished jobs to compare");
    o.expect(sidecar.calls > 0, "remote path never reached the mock");
    if (o.ok)
      o.detail = fmt::format("{} jobs ({} done, {} cancelled), {} sidecar calls, hashes identical", jobs.size(), done,
                             cancelled, sidecar.calls.load());
  }
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  criterion("population worked example (14 organoids, 7 cysts)", 1.0, population_worked_example);
  criterion("area conversion exactness", 1.0, area_conversion);
  criterion("circularity calibration", 10.0, circularity_calibration);
  criterion("tracking oracle suite", 60.0, tracking_suite);
  criterion("growth summary", 1.0, growth_summary_check);
  criterion("end-to-end determinism", 120.0, end_to_end_determinism);
  criterion("service state machine", 30.0, service_state_machine);
  return failures ? 1 : 0;
}
