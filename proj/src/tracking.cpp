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

#include "cystrack/tracking.hpp"

#include "cystrack/mask.hpp"
#include "cystrack/threshold.hpp"

#include <algorithm>
#include <cmath>

namespace cystrack {

void FrameSequence::check() const {
  if (frames.size() < 2)
    throw TrackingError("InputMismatch", "frames", "need at least 2 frames, got " + std::to_string(frames.size()));
  for (std::size_t i = 0; i < frames.size(); ++i)
    if (frames[i].cols() != frames.front().cols() || frames[i].rows() != frames.front().rows())
      throw TrackingError("InputMismatch", std::to_string(i),
                          "frame " + std::to_string(i) + " differs in size from frame 0");
  if (!source_ids.empty() && source_ids.size() != frames.size())
    throw TrackingError("InputMismatch", "source_ids", "source id count does not match frame count");
}

void TrackControl::checkpoint() const {
  if (stop.stop_requested()) throw TrackingError("Cancelled", "", "tracking was cancelled");
}

namespace {

enum class Polarity { bright, dark };

int margin_for(const PixelBox& box, double fraction) {
  return std::max(1, int(std::ceil(fraction * box.diagonal())));
}

BinaryMask split_window(const Frame& frame, const PixelBox& roi, const OtsuSplit& split, Polarity polarity) {
  const auto block = frame.block(roi.y0, roi.x0, roi.height(), roi.width()).cast<double>();
  return polarity == Polarity::bright ? BinaryMask(block >= split.cut) : BinaryMask(block < split.cut);
}

struct Candidate {
  int label = 0;
  std::int64_t area = 0;
  double score = 0.0;     // IoU against the reference (prompt box or previous mask)
  double distance = 0.0;  // centroid distance to the reference
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
};

// Scores every component of `fg` (window coordinates) against `reference`,
// a window-sized mask, best first.
std::vector<Candidate> rank_candidates(const Labeling& lab, const BinaryMask& reference,
                                       const Eigen::Vector2d& reference_centroid) {
  std::vector<Candidate> c(std::size_t(lab.count));
  std::vector<std::int64_t> inter(std::size_t(lab.count), 0);
  std::vector<Eigen::Vector2d> sums(std::size_t(lab.count), Eigen::Vector2d::Zero());
  for (Eigen::Index y = 0; y < lab.labels.rows(); ++y)
    for (Eigen::Index x = 0; x < lab.labels.cols(); ++x) {
      const std::int32_t l = lab.labels(y, x);
      if (l == 0) continue;
      const std::size_t i = std::size_t(l - 1);
      ++c[i].area;
      sums[i] += Eigen::Vector2d(double(x), double(y));
      if (reference(y, x)) ++inter[i];
    }
  const std::int64_t ref_area = reference.count();
  for (std::size_t i = 0; i < c.size(); ++i) {
    c[i].label = int(i) + 1;
    c[i].centroid = sums[i] / double(c[i].area);
    c[i].distance = (c[i].centroid - reference_centroid).norm();
    const std::int64_t uni = c[i].area + ref_area - inter[i];
    c[i].score = uni > 0 ? double(inter[i]) / double(uni) : 0.0;
  }
  std::stable_sort(c.begin(), c.end(), [](const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.label < b.label;
  });
  return c;
}

Eigen::Vector2d mask_centroid(const BinaryMask& m) {
  double sx = 0.0, sy = 0.0;
  std::int64_t n = 0;
  for (Eigen::Index y = 0; y < m.rows(); ++y)
    for (Eigen::Index x = 0; x < m.cols(); ++x)
      if (m(y, x)) {
        sx += double(x);
        sy += double(y);
        ++n;
      }
  return n ? Eigen::Vector2d(sx / double(n), sy / double(n)) : Eigen::Vector2d::Zero();
}

BinaryMask embed(const BinaryMask& window_mask, const PixelBox& roi, int width, int height) {
  BinaryMask full = BinaryMask::Zero(height, width);
  full.block(roi.y0, roi.x0, roi.height(), roi.width()) = window_mask;
  return full;
}

struct ObjectState {
  bool active = true;
  Polarity polarity = Polarity::bright;
  BinaryMask mask;
};

struct Proposal {
  std::size_t object = 0;
  std::vector<BinaryMask> masks;  // acceptable candidates, best first
  std::vector<double> scores;
  std::vector<double> distances;
};

ObjectState initial_state(const Frame& frame, const ObjectPrompt& prompt, const TrackerParams& params) {
  const int w = int(frame.cols()), h = int(frame.rows());
  const std::string id = std::to_string(prompt.object_id);
  const PixelBox roi = prompt.bbox.dilated(margin_for(prompt.bbox, params.search_margin)).clamped(w, h);
  if (roi.empty()) throw TrackingError("PromptMismatch", id, "prompt box of object " + id + " is outside the frame");

  const OtsuSplit split = otsu_split(frame.block(roi.y0, roi.x0, roi.height(), roi.width()));
  if (!split.valid || split.separability < params.min_separability)
    throw TrackingError("PromptMismatch", id,
                        "prompt box of object " + id + " holds no separable object on the annotated frame");

  PixelBox local = prompt.bbox;
  local.x0 -= roi.x0;
  local.x1 -= roi.x0;
  local.y0 -= roi.y0;
  local.y1 -= roi.y0;
  const BinaryMask box = box_mask(roi.width(), roi.height(), local);
  const Eigen::Vector2d box_centre((local.x0 + local.x1 - 1) / 2.0, (local.y0 + local.y1 - 1) / 2.0);

  ObjectState best;
  best.active = false;
  double best_fill = 0.0;
  std::int64_t best_area = 0;
  BinaryMask best_window;
  for (Polarity p : {Polarity::bright, Polarity::dark}) {
    const BinaryMask fg = split_window(frame, roi, split, p);
    const Labeling lab = label_components(fg);
    if (lab.count == 0) continue;
    const std::vector<Candidate> ranked = rank_candidates(lab, box, box_centre);
    const Candidate& top = ranked.front();
    if (top.score > best_fill || (top.score == best_fill && top.area > best_area && best.active)) {
      best_fill = top.score;
      best_area = top.area;
      best.active = true;
      best.polarity = p;
      best_window = lab.labels == top.label;
    }
  }
  if (!best.active || best_fill <= 0.0 || best_area < params.min_area_px)
    throw TrackingError("PromptMismatch", id, "no object found inside the prompt box of object " + id);
  best.mask = embed(best_window, roi, w, h);
  return best;
}

Proposal propose(const Frame& frame, std::size_t object, const ObjectState& state, const TrackerParams& params) {
  Proposal out;
  out.object = object;
  const int w = int(frame.cols()), h = int(frame.rows());
  const PixelBox prev_box = bounding_box(state.mask);
  const PixelBox roi = prev_box.dilated(margin_for(prev_box, params.search_margin)).clamped(w, h);

  const OtsuSplit split = otsu_split(frame.block(roi.y0, roi.x0, roi.height(), roi.width()));
  if (!split.valid || split.separability < params.min_separability) return out;

  const BinaryMask fg = split_window(frame, roi, split, state.polarity);
  const Labeling lab = label_components(fg);
  if (lab.count == 0) return out;

  const BinaryMask prev_window = state.mask.block(roi.y0, roi.x0, roi.height(), roi.width());
  const Eigen::Vector2d prev_centroid = mask_centroid(prev_window);
  for (const Candidate& c : rank_candidates(lab, prev_window, prev_centroid)) {
    if (c.score < params.iou_floor) break;
    if (c.area < params.min_area_px) continue;
    out.masks.push_back(embed(lab.labels == c.label, roi, w, h));
    out.scores.push_back(c.score);
    out.distances.push_back(c.distance);
  }
  return out;
}

constexpr double kSameBlobIou = 0.5;

}  // namespace

std::vector<Timeline> baseline_segment(const SegmenterRequest& request, const TrackerParams& params,
                                       const TrackControl& control) {
  const std::size_t n_frames = request.frames.size();
  std::vector<Timeline> out(request.prompts.size(), Timeline(n_frames));
  if (n_frames == 0) return out;

  std::vector<ObjectState> states;
  states.reserve(request.prompts.size());
  for (std::size_t o = 0; o < request.prompts.size(); ++o) {
    states.push_back(initial_state(request.frames[0].get(), request.prompts[o], params));
    out[o][0] = states.back().mask;
  }
  control.progress(1, int(n_frames));

  for (std::size_t k = 1; k < n_frames; ++k) {
    control.checkpoint();
    const Frame& frame = request.frames[k].get();

    std::vector<Proposal> proposals;
    for (std::size_t o = 0; o < states.size(); ++o)
      if (states[o].active) proposals.push_back(propose(frame, o, states[o], params));

    // Greedy assignment: strongest match first; a mask already claimed by
    // another object (same blob) cannot be taken again.
    std::stable_sort(proposals.begin(), proposals.end(), [&](const Proposal& a, const Proposal& b) {
      const double sa = a.scores.empty() ? -1.0 : a.scores.front();
      const double sb = b.scores.empty() ? -1.0 : b.scores.front();
      if (sa != sb) return sa > sb;
      const double da = a.distances.empty() ? 0.0 : a.distances.front();
      const double db = b.distances.empty() ? 0.0 : b.distances.front();
      if (da != db) return da < db;
      return request.prompts[a.object].object_id < request.prompts[b.object].object_id;
    });

    std::vector<const BinaryMask*> claimed;
    for (Proposal& p : proposals) {
      ObjectState& st = states[p.object];
      const BinaryMask* chosen = nullptr;
      for (const BinaryMask& m : p.masks) {
        const bool taken = std::any_of(claimed.begin(), claimed.end(),
                                       [&](const BinaryMask* c) { return iou(*c, m) > kSameBlobIou; });
        if (!taken) {
          chosen = &m;
          break;
        }
      }
      if (!chosen) {
        st.active = false;
        control.log("object " + std::to_string(request.prompts[p.object].object_id) + " absent from processing frame " +
                    std::to_string(k) + " onwards");
        continue;
      }
      st.mask = *chosen;
      claimed.push_back(&st.mask);
      out[p.object][k] = st.mask;
    }
    control.progress(int(k) + 1, int(n_frames));
  }
  return out;
}

Timeline reverse_timeline(Timeline timeline) {
  std::reverse(timeline.begin(), timeline.end());
  return timeline;
}

std::optional<int> formation_frame(const Timeline& chronological) {
  for (std::size_t i = 0; i < chronological.size(); ++i)
    if (chronological[i]) return int(i);
  return std::nullopt;
}

int repair_monotone_presence(Timeline& chronological) {
  int start = int(chronological.size());
  while (start > 0 && chronological[std::size_t(start - 1)]) --start;
  int dropped = 0;
  for (int i = 0; i < start; ++i)
    if (chronological[std::size_t(i)]) {
      chronological[std::size_t(i)].reset();
      ++dropped;
    }
  return dropped;
}

TrackResult assemble_track_result(std::vector<Timeline> backward, const ValidatedSession& session,
                                  const TrackControl& control) {
  TrackResult result;
  result.width = session.frame_width();
  result.height = session.frame_height();
  result.frame_count = session.frame_count();

  if (int(backward.size()) != session.cyst_count())
    throw TrackingError("BackendFailure", "",
                        "backend returned " + std::to_string(backward.size()) + " timelines for " +
                            std::to_string(session.cyst_count()) + " prompts");

  for (const CystRef& cyst : session.cysts()) {
    Timeline& tl = backward[std::size_t(cyst.index)];
    if (int(tl.size()) != result.frame_count)
      throw TrackingError("BackendFailure", cyst.cyst_id,
                          "backend returned " + std::to_string(tl.size()) + " frames for cyst '" + cyst.cyst_id +
                              "', expected " + std::to_string(result.frame_count));
    for (std::size_t k = 0; k < tl.size(); ++k) {
      if (!tl[k]) continue;
      if (tl[k]->cols() != result.width || tl[k]->rows() != result.height)
        throw TrackingError("BackendFailure", cyst.cyst_id,
                            "mask for cyst '" + cyst.cyst_id + "' at processing frame " + std::to_string(k) +
                                " has the wrong size");
      if (!tl[k]->any()) tl[k].reset();
    }

    CystTrack ct;
    ct.cyst_index = cyst.index;
    ct.masks = reverse_timeline(std::move(tl));
    if (!ct.masks.back())
      throw TrackingError("BackendFailure", cyst.cyst_id,
                          "backend returned no mask for cyst '" + cyst.cyst_id + "' on the annotated frame");
    if (const int dropped = repair_monotone_presence(ct.masks); dropped > 0) {
      const std::string w = "cyst '" + cyst.cyst_id + "': presence was not monotone; dropped " +
                            std::to_string(dropped) + " mask(s) before the last gap";
      result.warnings.push_back(w);
      control.log("warning: " + w);
    }
    ct.formation_frame = *formation_frame(ct.masks);
    result.cysts.push_back(std::move(ct));
  }
  return result;
}

TrackResult track(const FrameSequence& frames, const ValidatedSession& session, SegmenterBackend& backend,
                  const TrackerParams& params, const TrackControl& control) {
  frames.check();
  if (frames.width() != session.frame_width() || frames.height() != session.frame_height() ||
      frames.size() != session.frame_count())
    throw TrackingError("InputMismatch", "session", "annotation session was not validated against these frames");

  SegmenterRequest request;
  request.bit_depth = frames.bit_depth;
  for (int i = frames.size() - 1; i >= 0; --i) {
    request.frames.push_back(std::cref(frames.frames[std::size_t(i)]));
    request.chronological_index.push_back(i);
  }
  for (const CystRef& c : session.cysts()) request.prompts.push_back({c.index, c.bbox});

  control.log("tracking " + std::to_string(session.cyst_count()) + " cyst(s) backwards over " +
              std::to_string(frames.size()) + " frames with backend '" + backend.name() + "'");
  std::vector<Timeline> backward;
  try {
    backward = backend.segment(request, params, control);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw TrackingError("BackendFailure", backend.name(), std::string("backend failed: ") + e.what());
  }
  return assemble_track_result(std::move(backward), session, control);
}

}  // namespace cystrack
