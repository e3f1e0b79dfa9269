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

#include "cystrack/mask.hpp"

#include <numbers>
#include <numeric>

namespace cystrack {

double PixelBox::diagonal() const { return std::hypot(double(width()), double(height())); }

BinaryMask box_mask(int width, int height, const PixelBox& box) {
  BinaryMask m = BinaryMask::Zero(height, width);
  const PixelBox b = box.clamped(width, height);
  if (!b.empty()) m.block(b.y0, b.x0, b.height(), b.width()).setConstant(true);
  return m;
}

namespace {

class DisjointSet {
 public:
  std::int32_t make() {
    parent_.push_back(std::int32_t(parent_.size()));
    return parent_.back();
  }
  std::int32_t find(std::int32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  std::size_t size() const { return parent_.size(); }
  void unite(std::int32_t a, std::int32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) parent_[b] = a;
    else parent_[a] = b;
  }

 private:
  std::vector<std::int32_t> parent_;
};

}  // namespace

Labeling label_components(const BinaryMask& mask) {
  const Eigen::Index h = mask.rows(), w = mask.cols();
  LabelImage provisional = LabelImage::Zero(h, w);
  DisjointSet sets;
  sets.make();  // label 0 is background

  // First pass: provisional labels from the already-visited neighbours
  // (W, NW, N, NE).
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      std::int32_t label = 0;
      auto join = [&](Eigen::Index ny, Eigen::Index nx) {
        if (ny < 0 || nx < 0 || nx >= w) return;
        const std::int32_t l = provisional(ny, nx);
        if (l == 0) return;
        if (label == 0) label = l;
        else sets.unite(label, l);
      };
      join(y, x - 1);
      join(y - 1, x - 1);
      join(y - 1, x);
      join(y - 1, x + 1);
      if (label == 0) label = sets.make();
      provisional(y, x) = label;
    }
  }

  // Second pass: resolve equivalences and renumber by first appearance.
  Labeling out{LabelImage::Zero(h, w), 0};
  std::vector<std::int32_t> dense(sets.size(), 0);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const std::int32_t l = provisional(y, x);
      if (l == 0) continue;
      const std::int32_t root = sets.find(l);
      if (dense[root] == 0) dense[root] = ++out.count;
      out.labels(y, x) = dense[root];
    }
  }
  return out;
}

std::vector<BinaryMask> connected_components(const BinaryMask& mask) {
  const Labeling lab = label_components(mask);
  std::vector<BinaryMask> out;
  out.reserve(std::size_t(lab.count));
  for (int l = 1; l <= lab.count; ++l) out.push_back(lab.labels == l);
  return out;
}

BinaryMask largest_component(const BinaryMask& mask) {
  const Labeling lab = label_components(mask);
  if (lab.count == 0) throw MaskError("EmptyMask", "mask has no foreground pixels");
  if (lab.count == 1) return mask;
  std::vector<std::int64_t> sizes(std::size_t(lab.count) + 1, 0);
  for (Eigen::Index i = 0; i < lab.labels.size(); ++i) ++sizes[std::size_t(lab.labels.data()[i])];
  const auto best = std::max_element(sizes.begin() + 1, sizes.end()) - sizes.begin();
  return lab.labels == std::int32_t(best);
}

PixelBox bounding_box(const BinaryMask& mask) {
  const Eigen::Array<bool, Eigen::Dynamic, 1> rows = mask.rowwise().any();
  const Eigen::Array<bool, 1, Eigen::Dynamic> cols = mask.colwise().any();
  PixelBox b;
  if (!rows.any()) return b;
  Eigen::Index first = 0, last = rows.size() - 1;
  while (!rows(first)) ++first;
  while (!rows(last)) --last;
  b.y0 = int(first);
  b.y1 = int(last) + 1;
  first = 0;
  last = cols.size() - 1;
  while (!cols(first)) ++first;
  while (!cols(last)) --last;
  b.x0 = int(first);
  b.x1 = int(last) + 1;
  return b;
}

namespace {

Contour rolled(const Contour& c) {
  const Eigen::Index n = c.rows();
  Contour r(n, 2);
  r.topRows(n - 1) = c.bottomRows(n - 1);
  r.row(n - 1) = c.row(0);
  return r;
}

}  // namespace

double arc_length(const Contour& contour) {
  if (contour.rows() < 2) return 0.0;
  return (rolled(contour) - contour).rowwise().norm().sum();
}

double signed_area(const Contour& contour) {
  if (contour.rows() < 3) return 0.0;
  const Contour next = rolled(contour);
  return 0.5 * (contour.col(0).cwiseProduct(next.col(1)) - next.col(0).cwiseProduct(contour.col(1))).sum();
}

Contour smooth_contour(const Contour& contour, int passes) {
  Contour c = contour;
  for (int i = 0; i < passes && c.rows() > 2; ++i) c = 0.5 * (c + rolled(c));
  return c;
}

namespace {

// Outer loop of the marching-squares contour set of one component, unsmoothed.
// Works on the bounding-box crop; padding with background keeps it exact.
Contour outer_loop(const BinaryMask& component) {
  const PixelBox b = bounding_box(component);
  std::vector<Contour> loops =
      marching_squares(component.block(b.y0, b.x0, b.height(), b.width()).cast<double>(), 0.5, 0.0);
  for (Contour& loop : loops) loop.rowwise() += Eigen::RowVector2d(b.x0, b.y0);
  const auto outer = std::max_element(loops.begin(), loops.end(), [](const Contour& a, const Contour& b) {
    return std::abs(signed_area(a)) < std::abs(signed_area(b));
  });
  return *outer;
}

}  // namespace

Contour trace_contour(const BinaryMask& mask) {
  const Labeling lab = label_components(mask);
  if (lab.count == 0) throw MaskError("EmptyMask", "mask has no foreground pixels");
  if (lab.count > 1)
    throw MaskError("MultipleComponents",
                    "mask has " + std::to_string(lab.count) + " components; expected exactly one");
  return smooth_contour(outer_loop(mask), kContourSmoothingPasses);
}

Morphometry morphometry(const BinaryMask& mask, ComponentPolicy policy) {
  const std::vector<BinaryMask> parts = connected_components(mask);
  if (parts.empty()) throw MaskError("EmptyMask", "mask has no foreground pixels");

  Morphometry m;
  BinaryMask counted;
  if (policy == ComponentPolicy::largest) {
    std::size_t best = 0;
    std::int64_t best_area = -1;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      const std::int64_t a = parts[i].count();
      if (a > best_area) {
        best = i;
        best_area = a;
      }
    }
    counted = parts[best];
    m.perimeter_px = arc_length(smooth_contour(outer_loop(counted), kContourSmoothingPasses));
  } else {
    counted = mask;
    for (const BinaryMask& p : parts)
      m.perimeter_px += arc_length(smooth_contour(outer_loop(p), kContourSmoothingPasses));
  }

  m.area_px = counted.count();
  m.bbox = bounding_box(counted);

  double sx = 0.0, sy = 0.0;
  for (Eigen::Index y = m.bbox.y0; y < m.bbox.y1; ++y)
    for (Eigen::Index x = m.bbox.x0; x < m.bbox.x1; ++x)
      if (counted(y, x)) {
        sx += double(x);
        sy += double(y);
      }
  m.centroid = Eigen::Vector2d(sx, sy) / double(m.area_px);

  const double p2 = m.perimeter_px * m.perimeter_px;
  m.circularity = p2 > 0.0 ? std::clamp(4.0 * std::numbers::pi * double(m.area_px) / p2, 0.0, 1.0) : 0.0;
  m.unreliable = m.area_px < kReliableMinArea;
  return m;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw MaskError("DimensionMismatch", "masks differ in size: " + std::to_string(a.cols()) + "x" +
                                             std::to_string(a.rows()) + " vs " + std::to_string(b.cols()) +
                                             "x" + std::to_string(b.rows()));
  const std::int64_t uni = (a || b).count();
  if (uni == 0) return 0.0;
  return double((a && b).count()) / double(uni);
}

}  // namespace cystrack
