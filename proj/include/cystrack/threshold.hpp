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

struct OtsuSplit {
  double cut = 0.0;           // bright class: value >= cut; dark class: value < cut
  double separability = 0.0;  // between-class / total variance, in [0, 1]
  bool valid = false;         // false when the region is constant
};

/// Otsu's two-class split of the values in `region`.
///
/// Values are binned into at most 256 bins spanning [min, max]; when the
/// range is narrower than 256 each integer value gets its own bin. `cut` is
/// the upper edge of the last bin assigned to the dark class.
template <typename Derived>
OtsuSplit otsu_split(const Eigen::DenseBase<Derived>& region) {
  OtsuSplit out;
  if (region.size() == 0) return out;
  const double lo = double(region.minCoeff());
  const double hi = double(region.maxCoeff());
  if (!(hi > lo)) return out;

  const double span = hi - lo + 1.0;
  const int bins = span <= 256.0 ? int(span) : 256;
  const double width = span / bins;

  std::array<double, 256> hist{};
  for (Eigen::Index r = 0; r < region.rows(); ++r)
    for (Eigen::Index c = 0; c < region.cols(); ++c) {
      int b = int((double(region.derived().coeff(r, c)) - lo) / width);
      hist[std::size_t(b < bins ? b : bins - 1)] += 1.0;
    }

  const double n = double(region.size());
  double total_sum = 0.0, total_sq = 0.0;
  for (int b = 0; b < bins; ++b) {
    const double centre = lo + (b + 0.5) * width;
    total_sum += hist[b] * centre;
    total_sq += hist[b] * centre * centre;
  }
  const double mean = total_sum / n;
  const double total_var = total_sq / n - mean * mean;

  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_bin = 0;
  for (int b = 0; b < bins - 1; ++b) {
    const double centre = lo + (b + 0.5) * width;
    w0 += hist[b];
    sum0 += hist[b] * centre;
    const double w1 = n - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0;
    const double m1 = (total_sum - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1) / (n * n);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  out.cut = lo + (best_bin + 1) * width;
  out.separability = total_var > 0.0 ? std::min(1.0, best / total_var) : 0.0;
  out.valid = true;
  return out;
}

}  // namespace cystrack
