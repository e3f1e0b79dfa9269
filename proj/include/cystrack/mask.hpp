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

#include "cystrack/error.hpp"
#include "cystrack/image.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

namespace cystrack {

/// Closed polygon, one (x, y) vertex per row. Closure is implicit: the last
/// vertex connects back to the first.
using Contour = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

/// How morphometry treats a mask that holds several 8-connected fragments.
enum class ComponentPolicy { merge, largest };

/// Number of edge-midpoint averaging passes applied to traced contours.
/// Must stay even so that a single-pixel contour remains a diamond.
inline constexpr int kContourSmoothingPasses = 4;

/// Masks with fewer foreground pixels than this are flagged unreliable.
inline constexpr std::int64_t kReliableMinArea = 5;

struct Labeling {
  LabelImage labels;  // 0 = background, 1..count in raster order of first pixel
  int count = 0;
};

/// 8-connected component labeling (two-pass, union-find).
Labeling label_components(const BinaryMask& mask);

/// Each 8-connected component as a full-size mask, in raster order of the
/// component's first pixel. Empty input gives an empty list.
std::vector<BinaryMask> connected_components(const BinaryMask& mask);

/// The component with the most pixels (earliest in raster order on ties).
/// Throws MaskError("EmptyMask") on an empty mask.
BinaryMask largest_component(const BinaryMask& mask);

/// Smallest half-open box holding every foreground pixel; empty box for an
/// empty mask.
PixelBox bounding_box(const BinaryMask& mask);

double arc_length(const Contour& contour);

/// Shoelace area. Positive for loops that run clockwise on screen (y down).
double signed_area(const Contour& contour);

/// Replaces every vertex by the midpoint of its outgoing edge, `passes` times.
Contour smooth_contour(const Contour& contour, int passes);

namespace detail {

struct CrossingKey {
  // Edge leaving grid corner (x, y) rightward (horizontal) or downward.
  static std::int64_t horizontal(std::int64_t x, std::int64_t y, std::int64_t stride) {
    return ((y + 1) * stride + (x + 1)) * 2;
  }
  static std::int64_t vertical(std::int64_t x, std::int64_t y, std::int64_t stride) {
    return ((y + 1) * stride + (x + 1)) * 2 + 1;
  }
};

}  // namespace detail

/// Marching-squares iso-contours of `field` at `level`.
///
/// Grid corners sit on pixel centres; the field is padded by one ring of
/// `outside` (which must not exceed `level`) so every loop closes. A corner
/// is inside when its value is strictly above `level`. Crossing points are
/// linearly interpolated along cell edges. Saddle cells join the two inside
/// corners, matching 8-connectivity of the above-level set. Loops are
/// returned in a deterministic order (by the first crossing in raster order).
template <typename Derived>
std::vector<Contour> marching_squares(const Eigen::DenseBase<Derived>& field, double level,
                                      double outside = 0.0) {
  const std::int64_t h = field.rows();
  const std::int64_t w = field.cols();
  const std::int64_t stride = w + 2;

  auto value = [&](std::int64_t x, std::int64_t y) -> double {
    if (x < 0 || y < 0 || x >= w || y >= h) return outside;
    return double(field.derived().coeff(y, x));
  };

  struct Segment {
    std::int64_t end;
    double x, y;
  };
  std::unordered_map<std::int64_t, Segment> segments;
  std::vector<std::int64_t> starts;

  for (std::int64_t cy = -1; cy < h; ++cy) {
    for (std::int64_t cx = -1; cx < w; ++cx) {
      // Corners clockwise on screen: TL, TR, BR, BL.
      const std::int64_t px[4] = {cx, cx + 1, cx + 1, cx};
      const std::int64_t py[4] = {cy, cy, cy + 1, cy + 1};
      double v[4];
      bool in[4];
      int inside_count = 0;
      for (int i = 0; i < 4; ++i) {
        v[i] = value(px[i], py[i]);
        in[i] = v[i] > level;
        inside_count += in[i];
      }
      if (inside_count == 0 || inside_count == 4) continue;

      // Edge i runs from corner i to corner i+1.
      const std::int64_t key[4] = {
          detail::CrossingKey::horizontal(cx, cy, stride),
          detail::CrossingKey::vertical(cx + 1, cy, stride),
          detail::CrossingKey::horizontal(cx, cy + 1, stride),
          detail::CrossingKey::vertical(cx, cy, stride),
      };
      auto crossing = [&](int e, double& x, double& y) {
        const int a = e, b = (e + 1) % 4;
        const double t = (level - v[a]) / (v[b] - v[a]);
        x = double(px[a]) + t * double(px[b] - px[a]);
        y = double(py[a]) + t * double(py[b] - py[a]);
      };

      for (int e = 0; e < 4; ++e) {
        const bool falling = in[e] && !in[(e + 1) % 4];
        if (!falling) continue;
        int r = (e + 1) % 4;
        while (in[r] || !in[(r + 1) % 4]) r = (r + 1) % 4;
        Segment s{key[r], 0.0, 0.0};
        crossing(e, s.x, s.y);
        segments.emplace(key[e], s);
        starts.push_back(key[e]);
      }
    }
  }

  std::sort(starts.begin(), starts.end());
  std::vector<Contour> loops;
  std::unordered_map<std::int64_t, bool> used;
  used.reserve(segments.size());
  for (std::int64_t first : starts) {
    if (used[first]) continue;
    std::vector<double> coords;
    std::int64_t cur = first;
    do {
      used[cur] = true;
      const Segment& s = segments.at(cur);
      coords.push_back(s.x);
      coords.push_back(s.y);
      cur = s.end;
    } while (cur != first);
    loops.push_back(Eigen::Map<const Contour>(coords.data(), Eigen::Index(coords.size() / 2), 2));
  }
  return loops;
}

/// Outer boundary of a single 8-connected component: the marching-squares
/// iso-contour at 0.5 of the indicator, smoothed by kContourSmoothingPasses.
/// Throws MaskError("EmptyMask") or MaskError("MultipleComponents").
Contour trace_contour(const BinaryMask& mask);

struct Morphometry {
  std::int64_t area_px = 0;
  double perimeter_px = 0.0;
  double circularity = 0.0;  // 4*pi*area / perimeter^2, clamped to [0, 1]
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  PixelBox bbox;
  bool unreliable = false;  // area below kReliableMinArea
};

/// Area, perimeter, circularity, centroid and box of a mask. With `largest`
/// only the biggest component counts; with `merge` areas add up and the
/// perimeter is the sum over per-component contours.
Morphometry morphometry(const BinaryMask& mask, ComponentPolicy policy = ComponentPolicy::largest);

/// Intersection over union; 0 when both masks are empty.
/// Throws MaskError("DimensionMismatch").
double iou(const BinaryMask& a, const BinaryMask& b);

}  // namespace cystrack
