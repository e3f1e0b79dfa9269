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
#include "cystrack/error.hpp"
#include "cystrack/image.hpp"

#include <functional>
#include <optional>
#include <stop_token>
#include <string>
#include <string_view>
#include <vector>

namespace cystrack {

/// Grayscale time-lapse in chronological order. Eight-bit sources are
/// widened to 16-bit storage; `bit_depth` remembers the original depth.
struct FrameSequence {
  std::vector<Frame> frames;
  std::vector<std::string> source_ids;
  int bit_depth = 8;

  int size() const { return int(frames.size()); }
  int width() const { return frames.empty() ? 0 : int(frames.front().cols()); }
  int height() const { return frames.empty() ? 0 : int(frames.front().rows()); }

  /// Throws TrackingError("InputMismatch") unless there are >= 2 frames of
  /// uniform size.
  void check() const;
};

struct TrackerParams {
  double iou_floor = 0.3;
  int min_area_px = 10;
  double search_margin = 0.25;     // fraction of the previous mask's bbox diagonal
  double min_separability = 0.8;   // Otsu between/total variance below which a region is background only
  bool operator==(const TrackerParams&) const = default;
};

struct ObjectPrompt {
  int object_id = 0;
  PixelBox bbox;
};

/// Input of one backward pass. `frames` run in processing order, i.e.
/// reversed chronology, so prompts apply to processing frame 0.
struct SegmenterRequest {
  std::vector<std::reference_wrapper<const Frame>> frames;
  std::vector<int> chronological_index;
  int bit_depth = 8;
  std::vector<ObjectPrompt> prompts;

  int width() const { return frames.empty() ? 0 : int(frames.front().get().cols()); }
  int height() const { return frames.empty() ? 0 : int(frames.front().get().rows()); }
};

/// One object's masks over a sequence of frames; nullopt marks absence.
using Timeline = std::vector<std::optional<BinaryMask>>;

/// Cancellation and progress hooks for a tracking job.
struct TrackControl {
  std::stop_token stop;
  std::function<void(int done, int total)> on_progress;
  std::function<void(std::string_view)> on_log;

  /// Throws TrackingError("Cancelled") when a stop has been requested.
  void checkpoint() const;
  void log(std::string_view line) const {
    if (on_log) on_log(line);
  }
  void progress(int done, int total) const {
    if (on_progress) on_progress(done, total);
  }
};

/// A promptable video segmenter. Implementations return one timeline per
/// prompt, in prompt order, indexed by processing frame.
class SegmenterBackend {
 public:
  virtual ~SegmenterBackend() = default;
  virtual std::string name() const = 0;
  virtual std::vector<Timeline> segment(const SegmenterRequest& request, const TrackerParams& params,
                                        const TrackControl& control) = 0;
};

/// Deterministic greedy tracker used when no model sidecar is configured.
///
/// On processing frame 0 each prompt box (dilated by the search margin) is
/// split with Otsu; the polarity whose best component overlaps the box most
/// is kept for the rest of the track. On every following frame the search
/// window is the previous mask's box dilated by `search_margin`; the window
/// is split again with the frozen polarity and the component with the
/// highest IoU against the previous mask wins (ties: nearer centroid, then
/// earlier component). An IoU below `iou_floor`, an area below
/// `min_area_px`, or a window that Otsu cannot separate ends the track: the
/// object is absent there and on every earlier chronological frame.
std::vector<Timeline> baseline_segment(const SegmenterRequest& request, const TrackerParams& params,
                                       const TrackControl& control = {});

class BaselineBackend final : public SegmenterBackend {
 public:
  std::string name() const override { return "baseline"; }
  std::vector<Timeline> segment(const SegmenterRequest& request, const TrackerParams& params,
                                const TrackControl& control) override {
    return baseline_segment(request, params, control);
  }
};

/// Index i maps to index size-1-i. An involution.
Timeline reverse_timeline(Timeline timeline);

/// First frame with a mask, if any.
std::optional<int> formation_frame(const Timeline& chronological);

/// Keeps only the latest maximal run of present frames that reaches the
/// final frame. Returns how many masks were dropped.
int repair_monotone_presence(Timeline& chronological);

struct CystTrack {
  int cyst_index = 0;
  Timeline masks;  // chronological
  int formation_frame = 0;

  bool present(int frame) const { return masks[std::size_t(frame)].has_value(); }
};

struct TrackResult {
  int width = 0;
  int height = 0;
  int frame_count = 0;
  std::vector<CystTrack> cysts;  // in ValidatedSession cyst order
  std::vector<std::string> warnings;
};

/// Turns backend output (processing order) into a chronological result:
/// reverses each timeline once, repairs monotone presence with a warning,
/// and checks that every cyst has a mask on the final frame. Throws
/// TrackingError("BackendFailure") on malformed output.
TrackResult assemble_track_result(std::vector<Timeline> backward, const ValidatedSession& session,
                                  const TrackControl& control = {});

/// Runs `backend` backwards from the final-frame prompts and returns the
/// chronological result.
TrackResult track(const FrameSequence& frames, const ValidatedSession& session, SegmenterBackend& backend,
                  const TrackerParams& params, const TrackControl& control = {});

}  // namespace cystrack
