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

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cstdint>

namespace cystrack {

// Dense 2-D rasters. Rows are image rows (y), columns are image columns (x),
// so element (y, x) is the pixel at column x of row y.
template <typename Scalar>
using Image = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using BinaryMask = Image<bool>;
using Frame = Image<std::uint16_t>;
using Gray8 = Image<std::uint8_t>;
using LabelImage = Image<std::int32_t>;

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelBox {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  std::int64_t area() const { return std::int64_t(width()) * height(); }
  bool empty() const { return x1 <= x0 || y1 <= y0; }
  bool contains(double x, double y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  double diagonal() const;

  PixelBox dilated(int margin) const { return {x0 - margin, y0 - margin, x1 + margin, y1 + margin}; }
  PixelBox clamped(int width, int height) const {
    return {std::clamp(x0, 0, width), std::clamp(y0, 0, height), std::clamp(x1, 0, width),
            std::clamp(y1, 0, height)};
  }
  PixelBox intersect(const PixelBox& o) const {
    return {std::max(x0, o.x0), std::max(y0, o.y0), std::min(x1, o.x1), std::min(y1, o.y1)};
  }

  bool operator==(const PixelBox&) const = default;
};

/// width x height mask with the (clamped) box filled.
BinaryMask box_mask(int width, int height, const PixelBox& box);

/// Eight-bit RGB raster stored as three planes.
struct RgbImage {
  std::array<Gray8, 3> planes;

  RgbImage() = default;
  RgbImage(int width, int height) {
    for (auto& p : planes) p = Gray8::Zero(height, width);
  }
  int width() const { return int(planes[0].cols()); }
  int height() const { return int(planes[0].rows()); }

  bool operator==(const RgbImage& o) const {
    for (int c = 0; c < 3; ++c)
      if (planes[c].rows() != o.planes[c].rows() || planes[c].cols() != o.planes[c].cols() ||
          (planes[c] != o.planes[c]).any())
        return false;
    return true;
  }
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  bool operator==(const Rgb&) const = default;
};

}  // namespace cystrack
