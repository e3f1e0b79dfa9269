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

#include "cystrack/image.hpp"
#include "cystrack/tracking.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cystrack {

/// Row-major run lengths alternating background/foreground, starting with a
/// (possibly zero) background run. Runs sum to width * height.
std::vector<std::int64_t> rle_encode(const BinaryMask& mask);

/// Inverse of rle_encode. Throws TrackingError("ProtocolError") when runs
/// are negative or do not sum to width * height.
BinaryMask rle_decode(std::span<const std::int64_t> runs, int width, int height);

// SegmenterBackend wire protocol, spoken as JSON over HTTP POST /segment.
//
// Request:
//   {"width", "height", "bit_depth",
//    "frames": [{"index", "chronological_index", "png_base64"}],   processing order
//    "prompts": [{"object_id", "bbox": [x0, y0, x1, y1]}],
//    "params": {"iou_floor", "min_area_px", "search_margin", "min_separability"}}
// Response:
//   {"masks": [{"object_id", "frame_index", "rle": [...], "present"}]}
// `frame_index` is the processing-order index from the request. Absent
// masks carry present=false and an empty rle.

nlohmann::json encode_segment_request(const SegmenterRequest& request, const TrackerParams& params);

/// Parsed request. Owns its frames, so `request()` stays valid while the
/// object lives.
class DecodedSegmentRequest {
 public:
  explicit DecodedSegmentRequest(const nlohmann::json& body);
  const SegmenterRequest& request() const { return request_; }
  const TrackerParams& params() const { return params_; }

 private:
  std::vector<Frame> frames_;
  SegmenterRequest request_;
  TrackerParams params_;
};

nlohmann::json encode_segment_response(const SegmenterRequest& request, const std::vector<Timeline>& timelines);

/// Checks the response against the request (every object on every frame,
/// runs summing to width * height, present=false iff rle empty) and returns
/// one timeline per prompt. Throws TrackingError("ProtocolError").
std::vector<Timeline> decode_segment_response(const nlohmann::json& body, const SegmenterRequest& request);

/// Server side of the protocol: decodes `body`, runs `backend`, and encodes
/// its masks. Throws TrackingError("ProtocolError") on malformed requests.
nlohmann::json handle_segment_request(const nlohmann::json& body, SegmenterBackend& backend);

/// Backend that forwards the backward pass to a sidecar at `base_url`.
class RemoteBackend final : public SegmenterBackend {
 public:
  explicit RemoteBackend(std::string base_url, std::string bearer_token = {},
                         std::chrono::seconds timeout = std::chrono::seconds(600));
  std::string name() const override { return "remote"; }
  const std::string& url() const { return base_url_; }
  std::vector<Timeline> segment(const SegmenterRequest& request, const TrackerParams& params,
                                const TrackControl& control) override;

  /// True when a TCP connection to the sidecar succeeds.
  bool reachable() const;

 private:
  std::string base_url_;
  std::string token_;
  std::chrono::seconds timeout_;
};

}  // namespace cystrack
