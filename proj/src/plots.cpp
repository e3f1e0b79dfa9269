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
#include "cystrack/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace cystrack {

namespace fs = std::filesystem;

namespace {

constexpr double kWidth = 760, kHeight = 460;
constexpr double kLeft = 80, kRight = 170, kTop = 50, kBottom = 60;

std::string esc(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string hex(const Rgb& c) { return fmt::format("#{:02x}{:02x}{:02x}", c.r, c.g, c.b); }

// Five-stop viridis approximation, t in [0, 1].
Rgb viridis(double t) {
  static constexpr Rgb kStops[] = {{68, 1, 84}, {59, 82, 139}, {33, 145, 140}, {94, 201, 98}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0) * 4.0;
  const int i = std::min(3, int(t));
  const double f = t - i;
  auto mix = [&](std::uint8_t a, std::uint8_t b) { return std::uint8_t(std::lround(a + (b - a) * f)); };
  return {mix(kStops[i].r, kStops[i + 1].r), mix(kStops[i].g, kStops[i + 1].g), mix(kStops[i].b, kStops[i + 1].b)};
}

std::vector<double> nice_ticks(double lo, double hi, int target = 5) {
  if (!(hi > lo)) hi = lo + 1.0;
  const double raw = (hi - lo) / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (m * mag >= raw) {
      step = m * mag;
      break;
    }
  std::vector<double> ticks;
  for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step)
    ticks.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
  return ticks;
}

std::string tick_label(double v) { return fmt::format("{:g}", v); }

struct Frame2D {
  double x_lo, x_hi, y_lo, y_hi;
  double px(double x) const { return kLeft + (x - x_lo) / (x_hi - x_lo) * (kWidth - kLeft - kRight); }
  double py(double y) const { return kHeight - kBottom - (y - y_lo) / (y_hi - y_lo) * (kHeight - kTop - kBottom); }
};

std::string header(const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\" "
      "font-family=\"Helvetica, Arial, sans-serif\" font-size=\"12\">\n"
      "<rect width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n"
      "<text x=\"{2}\" y=\"28\" font-size=\"16\" text-anchor=\"middle\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, esc(title));
}

std::string placeholder() {
  return fmt::format("<text class=\"placeholder\" x=\"{}\" y=\"{}\" font-size=\"18\" fill=\"#888888\" "
                     "text-anchor=\"middle\">no data</text>\n",
                     kWidth / 2, kHeight / 2);
}

std::string axes(const Frame2D& f, const std::string& xlabel, const std::string& ylabel) {
  std::string s;
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kTop, y1 = kHeight - kBottom;
  s += fmt::format("<g class=\"axes\" stroke=\"#000000\" fill=\"none\"><line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" "
                   "y2=\"{:.2f}\"/><line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/></g>\n",
                   x0, y1, x1, y1, x0, y0, x0, y1);
  for (double t : nice_ticks(f.x_lo, f.x_hi)) {
    const double x = f.px(t);
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#000000\"/>"
                     "<text x=\"{0:.2f}\" y=\"{3:.2f}\" text-anchor=\"middle\">{4}</text>\n",
                     x, y1, y1 + 5, y1 + 19, tick_label(t));
  }
  for (double t : nice_ticks(f.y_lo, f.y_hi)) {
    const double y = f.py(t);
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#000000\"/>"
                     "<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{3:.2f}\" y2=\"{1:.2f}\" stroke=\"#e0e0e0\"/>"
                     "<text x=\"{4:.2f}\" y=\"{5:.2f}\" text-anchor=\"end\">{6}</text>\n",
                     x0, y, x0 - 5, x1, x0 - 8, y + 4, tick_label(t));
  }
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n", (x0 + x1) / 2, kHeight - 18,
                   esc(xlabel));
  s += fmt::format("<text x=\"20\" y=\"{0:.2f}\" text-anchor=\"middle\" transform=\"rotate(-90 20 {0:.2f})\">{1}</text>\n",
                   (y0 + y1) / 2, esc(ylabel));
  return s;
}

bool any_present(const MetricsBundle& m) { return !m.correlation.empty(); }

double last_time(const MetricsBundle& m) {
  return m.population.time_h.empty() ? 1.0 : std::max(m.population.time_h.back(), 1e-9);
}

// Per-cyst lines of `value`, broken at absent frames, plus a bold mean line.
template <typename Value>
std::string trajectories(const MetricsBundle& m, const Frame2D& f, Value value) {
  std::string s;
  for (const CystRecord& r : m.records) {
    const std::string color = hex(palette_color(r.cyst_index));
    std::string points;
    auto flush = [&] {
      if (points.empty()) return;
      s += fmt::format("<polyline class=\"cyst\" data-cyst=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" "
                       "points=\"{}\"/>\n",
                       esc(r.cyst_id), color, points);
      points.clear();
    };
    for (const CystFrame& cf : r.frames) {
      if (!cf.present()) {
        flush();
        continue;
      }
      const double x = f.px(cf.time_h), y = f.py(value(*cf.measure));
      if (!points.empty()) points += ' ';
      points += fmt::format("{:.2f},{:.2f}", x, y);
      s += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"2.5\" fill=\"{}\"/>\n", x, y, color);
    }
    flush();
  }
  std::string mean;
  for (std::size_t k = 0; k < m.population.time_h.size(); ++k) {
    double sum = 0.0;
    int n = 0;
    for (const CystRecord& r : m.records)
      if (r.frames[k].present()) {
        sum += value(*r.frames[k].measure);
        ++n;
      }
    if (n == 0) continue;
    if (!mean.empty()) mean += ' ';
    mean += fmt::format("{:.2f},{:.2f}", f.px(m.population.time_h[k]), f.py(sum / n));
  }
  if (!mean.empty())
    s += fmt::format("<polyline class=\"mean\" fill=\"none\" stroke=\"#000000\" stroke-width=\"3\" points=\"{}\"/>\n",
                     mean);
  return s;
}

std::string legend(const MetricsBundle& m) {
  std::string s;
  const double x = kWidth - kRight + 16;
  double y = kTop + 6;
  for (const CystRecord& r : m.records) {
    s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"{3}\" "
                     "stroke-width=\"3\"/><text x=\"{4:.2f}\" y=\"{5:.2f}\">{6}</text>\n",
                     x, y, x + 18, hex(palette_color(r.cyst_index)), x + 24, y + 4, esc(r.cyst_id));
    y += 18;
  }
  s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{2:.2f}\" y2=\"{1:.2f}\" stroke=\"#000000\" "
                   "stroke-width=\"3\"/><text x=\"{3:.2f}\" y=\"{4:.2f}\">mean</text>\n",
                   x, y, x + 18, x + 24, y + 4);
  return s;
}

std::pair<double, double> area_range(const MetricsBundle& m) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const CorrelationRow& c : m.correlation) {
    lo = std::min(lo, c.area_um2);
    hi = std::max(hi, c.area_um2);
  }
  return {lo, hi};
}

double normalized(double v, double lo, double hi) { return hi > lo ? (v - lo) / (hi - lo) : 0.5; }

std::string colorbar(double x, double y, double height, double lo, double hi, const std::string& label) {
  std::string s = "<defs><linearGradient id=\"viridis\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\">";
  for (int i = 0; i <= 4; ++i) s += fmt::format("<stop offset=\"{}\" stop-color=\"{}\"/>", i / 4.0, hex(viridis(i / 4.0)));
  s += "</linearGradient></defs>\n";
  s += fmt::format("<rect class=\"colorbar\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"14\" height=\"{:.2f}\" "
                   "fill=\"url(#viridis)\" stroke=\"#000000\"/>\n",
                   x, y, height);
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", x + 20, y + 10, tick_label(hi));
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", x + 20, y + height, tick_label(lo));
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", x, y - 8, esc(label));
  return s;
}

}  // namespace

std::string areas_svg(const MetricsBundle& m) {
  std::string s = header("Cyst area trajectories");
  if (!any_present(m)) return s + placeholder() + "</svg>\n";
  const double hi = area_range(m).second;
  const Frame2D f{0.0, last_time(m), 0.0, hi > 0 ? hi * 1.05 : 1.0};
  s += axes(f, "Time (h)", "Area (µm²)");
  s += trajectories(m, f, [](const CystMeasure& c) { return c.area_um2; });
  s += legend(m);
  return s + "</svg>\n";
}

std::string circularity_svg(const MetricsBundle& m) {
  std::string s = header("Cyst circularity");
  if (!any_present(m)) return s + placeholder() + "</svg>\n";
  const Frame2D f{0.0, last_time(m), 0.0, 1.0};
  s += axes(f, "Time (h)", "Circularity");
  s += trajectories(m, f, [](const CystMeasure& c) { return c.circularity; });
  s += legend(m);
  return s + "</svg>\n";
}

std::string scatter_svg(const MetricsBundle& m) {
  std::string s = header("Circularity, area and time");
  if (!any_present(m)) return s + placeholder() + "</svg>\n";
  const Frame2D f{0.0, last_time(m), 0.0, 1.0};
  const auto [lo, hi] = area_range(m);
  s += axes(f, "Time (h)", "Circularity");
  for (const CorrelationRow& c : m.correlation)
    s += fmt::format("<circle class=\"point\" data-cyst=\"{}\" cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"5\" fill=\"{}\" "
                     "fill-opacity=\"0.85\" stroke=\"#333333\" stroke-width=\"0.5\"/>\n",
                     esc(c.cyst_id), f.px(c.time_h), f.py(c.circularity), hex(viridis(normalized(c.area_um2, lo, hi))));
  s += colorbar(kWidth - kRight + 24, kTop + 20, kHeight - kTop - kBottom - 40, lo, hi, "Area (µm²)");
  return s + "</svg>\n";
}

std::string heatmap_svg(const MetricsBundle& m) {
  std::string s = header("Cyst growth heterogeneity");
  if (m.records.empty()) return s + placeholder() + "</svg>\n";

  const std::size_t rows = m.growth.heatmap_order.size();
  const std::size_t cols = m.population.time_h.size();
  const double grid_x = 110, grid_y = kTop + 10, grid_w = 380, grid_h = kHeight - kTop - kBottom - 10;
  const double cw = grid_w / double(cols), ch = grid_h / double(rows);
  const auto [lo, hi] = any_present(m) ? area_range(m) : std::pair<double, double>{0.0, 1.0};

  s += "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" "
       "patternTransform=\"rotate(45)\"><rect width=\"6\" height=\"6\" fill=\"#f4f4f4\"/>"
       "<line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#9a9a9a\" stroke-width=\"2\"/></pattern></defs>\n";
  for (std::size_t r = 0; r < rows; ++r) {
    const CystRecord& rec = m.records[std::size_t(m.growth.heatmap_order[r])];
    const double y = grid_y + double(r) * ch;
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{}</text>\n", grid_x - 6, y + ch / 2 + 4,
                     esc(rec.cyst_id));
    for (std::size_t c = 0; c < cols; ++c) {
      const CystFrame& cf = rec.frames[c];
      const std::string fill =
          cf.present() ? hex(viridis(normalized(cf.measure->area_um2, lo, hi))) : std::string("url(#hatch)");
      s += fmt::format("<rect class=\"cell{}\" data-row=\"{}\" data-col=\"{}\" x=\"{:.2f}\" y=\"{:.2f}\" "
                       "width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\" stroke=\"#ffffff\" stroke-width=\"0.5\"/>\n",
                       cf.present() ? "" : " absent", r, c, grid_x + double(c) * cw, y, cw, ch, fill);
    }
  }
  for (std::size_t c = 0; c < cols; ++c)
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{}</text>\n",
                     grid_x + (double(c) + 0.5) * cw, grid_y + grid_h + 16, tick_label(m.population.time_h[c]));
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">Time (h)</text>\n", grid_x + grid_w / 2,
                   kHeight - 18);

  // Growth-rate bars, one per heatmap row.
  const double bar_x = grid_x + grid_w + 20, bar_w = 120;
  double rmax = 0.0;
  for (const GrowthRow& g : m.growth.rows)
    if (g.rate) rmax = std::max(rmax, std::abs(*g.rate));
  if (rmax == 0.0) rmax = 1.0;
  const bool has_negative = std::any_of(m.growth.rows.begin(), m.growth.rows.end(),
                                        [](const GrowthRow& g) { return g.rate && *g.rate < 0; });
  const double zero_x = has_negative ? bar_x + bar_w / 2 : bar_x;
  const double scale = (has_negative ? bar_w / 2 : bar_w) / rmax;
  s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">Growth rate (µm²/h)</text>\n",
                   bar_x + bar_w / 2, grid_y - 8);
  for (std::size_t r = 0; r < rows; ++r) {
    const int idx = m.growth.heatmap_order[r];
    const GrowthRow& g = m.growth.rows[std::size_t(idx)];
    const double y = grid_y + double(r) * ch;
    if (!g.rate) {
      s += fmt::format("<text class=\"bar-undefined\" x=\"{:.2f}\" y=\"{:.2f}\" fill=\"#888888\">n/a</text>\n",
                       zero_x + 4, y + ch / 2 + 4);
      continue;
    }
    const double len = *g.rate * scale;
    s += fmt::format("<rect class=\"bar\" data-row=\"{}\" x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" "
                     "fill=\"{}\"/>\n",
                     r, len >= 0 ? zero_x : zero_x + len, y + ch * 0.15, std::abs(len), ch * 0.7,
                     hex(palette_color(idx)));
    s += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"10\">{:.1f}</text>\n",
                     std::max(zero_x, zero_x + len) + 3, y + ch / 2 + 4, *g.rate);
  }
  s += fmt::format("<line x1=\"{0:.2f}\" y1=\"{1:.2f}\" x2=\"{0:.2f}\" y2=\"{2:.2f}\" stroke=\"#000000\"/>\n", zero_x,
                   grid_y, grid_y + grid_h);
  if (any_present(m)) s += colorbar(kWidth - 40, kTop + 20, grid_h - 30, lo, hi, "Area");
  return s + "</svg>\n";
}

std::vector<fs::path> render_plots(const MetricsBundle& m, const fs::path& dir) {
  const fs::path plots = dir / "plots";
  std::error_code ec;
  fs::create_directories(plots, ec);
  if (ec) throw IoError(ErrorCategory::output, plots.string(), "cannot create " + plots.string() + ": " + ec.message());
  const std::pair<const char*, std::string> files[] = {{"areas.svg", areas_svg(m)},
                                                       {"circularity.svg", circularity_svg(m)},
                                                       {"scatter.svg", scatter_svg(m)},
                                                       {"heatmap.svg", heatmap_svg(m)}};
  std::vector<fs::path> out;
  for (const auto& [name, text] : files) {
    io::write_file(plots / name, text);
    out.push_back(plots / name);
  }
  return out;
}

}  // namespace cystrack
