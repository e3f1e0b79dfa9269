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

#include "cystrack/protocol.hpp"

#include "cystrack/image_io.hpp"

#include <httplib.h>

#include <algorithm>
#include <map>

namespace cystrack {

using nlohmann::json;

std::vector<std::int64_t> rle_encode(const BinaryMask& mask) {
  std::vector<std::int64_t> runs;
  bool current = false;
  std::int64_t length = 0;
  // BinaryMask is row-major, so data() is already in scan order.
  const bool* data = mask.data();
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    if (data[i] != current) {
      runs.push_back(length);
      current = data[i];
      length = 0;
    }
    ++length;
  }
  runs.push_back(length);
  return runs;
}

BinaryMask rle_decode(std::span<const std::int64_t> runs, int width, int height) {
  const std::int64_t total = std::int64_t(width) * height;
  BinaryMask mask = BinaryMask::Zero(height, width);
  bool* data = mask.data();
  std::int64_t pos = 0;
  bool value = false;
  for (std::int64_t r : runs) {
    if (r < 0) throw TrackingError("ProtocolError", "rle", "negative run length in RLE");
    if (pos + r > total) throw TrackingError("ProtocolError", "rle", "RLE runs exceed width*height");
    if (value) std::fill(data + pos, data + pos + r, true);
    pos += r;
    value = !value;
  }
  if (pos != total)
    throw TrackingError("ProtocolError", "rle",
                        "RLE runs sum to " + std::to_string(pos) + ", expected " + std::to_string(total));
  return mask;
}

namespace {

[[noreturn]] void protocol_error(const std::string& entity, const std::string& message) {
  throw TrackingError("ProtocolError", entity, message);
}

const json& need(const json& obj, const char* key) {
  if (!obj.is_object()) protocol_error(key, "expected an object containing '" + std::string(key) + "'");
  const auto it = obj.find(key);
  if (it == obj.end()) protocol_error(key, "missing key '" + std::string(key) + "'");
  return *it;
}

std::int64_t need_int(const json& obj, const char* key) {
  const json& v = need(obj, key);
  if (!v.is_number_integer()) protocol_error(key, "'" + std::string(key) + "' must be an integer");
  return v.get<std::int64_t>();
}

}  // namespace

json encode_segment_request(const SegmenterRequest& request, const TrackerParams& params) {
  json frames = json::array();
  for (std::size_t i = 0; i < request.frames.size(); ++i) {
    const std::vector<std::uint8_t> png = io::encode_png(request.frames[i].get(), request.bit_depth);
    frames.push_back({{"index", i},
                      {"chronological_index", i < request.chronological_index.size() ? request.chronological_index[i]
                                                                                    : int(i)},
                      {"png_base64", io::base64_encode(png)}});
  }
  json prompts = json::array();
  for (const ObjectPrompt& p : request.prompts)
    prompts.push_back({{"object_id", p.object_id}, {"bbox", {p.bbox.x0, p.bbox.y0, p.bbox.x1, p.bbox.y1}}});
  return {{"width", request.width()},
          {"height", request.height()},
          {"bit_depth", request.bit_depth},
          {"frames", frames},
          {"prompts", prompts},
          {"params",
           {{"iou_floor", params.iou_floor},
            {"min_area_px", params.min_area_px},
            {"search_margin", params.search_margin},
            {"min_separability", params.min_separability}}}};
}

DecodedSegmentRequest::DecodedSegmentRequest(const json& body) {
  const std::int64_t width = need_int(body, "width");
  const std::int64_t height = need_int(body, "height");
  if (width < 1 || height < 1) protocol_error("width", "frame size must be positive");
  request_.bit_depth = body.contains("bit_depth") ? int(need_int(body, "bit_depth")) : 8;

  const json& frames = need(body, "frames");
  if (!frames.is_array() || frames.empty()) protocol_error("frames", "'frames' must be a non-empty array");
  frames_.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json& f = frames[i];
    if (need_int(f, "index") != std::int64_t(i)) protocol_error("frames", "frames must be listed in processing order");
    const json& data = need(f, "png_base64");
    if (!data.is_string()) protocol_error("png_base64", "'png_base64' must be a string");
    io::GrayImage img = io::decode_png(io::base64_decode(data.get<std::string>()));
    if (img.pixels.cols() != width || img.pixels.rows() != height)
      protocol_error("frames", "frame " + std::to_string(i) + " does not match the declared size");
    frames_.push_back(std::move(img.pixels));
    request_.chronological_index.push_back(
        f.contains("chronological_index") ? int(need_int(f, "chronological_index")) : int(i));
  }
  for (const Frame& f : frames_) request_.frames.push_back(std::cref(f));

  const json& prompts = need(body, "prompts");
  if (!prompts.is_array() || prompts.empty()) protocol_error("prompts", "'prompts' must be a non-empty array");
  for (const json& p : prompts) {
    const json& b = need(p, "bbox");
    if (!b.is_array() || b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number_integer(); }))
      protocol_error("bbox", "'bbox' must be four integers");
    request_.prompts.push_back(
        {int(need_int(p, "object_id")), {b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()}});
  }

  if (const auto it = body.find("params"); it != body.end() && it->is_object()) {
    params_.iou_floor = it->value("iou_floor", params_.iou_floor);
    params_.min_area_px = it->value("min_area_px", params_.min_area_px);
    params_.search_margin = it->value("search_margin", params_.search_margin);
    params_.min_separability = it->value("min_separability", params_.min_separability);
  }
}

json encode_segment_response(const SegmenterRequest& request, const std::vector<Timeline>& timelines) {
  json masks = json::array();
  for (std::size_t o = 0; o < timelines.size(); ++o)
    for (std::size_t k = 0; k < timelines[o].size(); ++k) {
      const std::optional<BinaryMask>& m = timelines[o][k];
      const bool present = m.has_value() && m->any();
      masks.push_back({{"object_id", request.prompts[o].object_id},
                       {"frame_index", k},
                       {"rle", present ? json(rle_encode(*m)) : json::array()},
                       {"present", present}});
    }
  return {{"masks", masks}};
}

std::vector<Timeline> decode_segment_response(const json& body, const SegmenterRequest& request) {
  const int w = request.width(), h = request.height();
  const std::size_t n_frames = request.frames.size();
  std::map<int, std::size_t> slot;
  for (std::size_t o = 0; o < request.prompts.size(); ++o) slot[request.prompts[o].object_id] = o;

  std::vector<Timeline> out(request.prompts.size(), Timeline(n_frames));
  std::vector<std::vector<bool>> seen(request.prompts.size(), std::vector<bool>(n_frames, false));

  const json& masks = need(body, "masks");
  if (!masks.is_array()) protocol_error("masks", "'masks' must be an array");
  for (const json& m : masks) {
    const std::int64_t object_id = need_int(m, "object_id");
    const std::int64_t frame = need_int(m, "frame_index");
    const auto it = slot.find(int(object_id));
    if (it == slot.end()) protocol_error(std::to_string(object_id), "response names unknown object " + std::to_string(object_id));
    if (frame < 0 || std::size_t(frame) >= n_frames)
      protocol_error(std::to_string(frame), "response frame_index " + std::to_string(frame) + " out of range");
    const json& present = need(m, "present");
    const json& rle = need(m, "rle");
    if (!present.is_boolean() || !rle.is_array()) protocol_error("masks", "'present' must be boolean and 'rle' an array");
    if (seen[it->second][std::size_t(frame)])
      protocol_error(std::to_string(object_id), "duplicate mask for object " + std::to_string(object_id));
    seen[it->second][std::size_t(frame)] = true;

    if (!present.get<bool>()) {
      if (!rle.empty()) protocol_error(std::to_string(object_id), "present=false must carry an empty rle");
      continue;
    }
    if (rle.empty()) protocol_error(std::to_string(object_id), "present=true with an empty rle");
    std::vector<std::int64_t> runs;
    runs.reserve(rle.size());
    for (const json& r : rle) {
      if (!r.is_number_integer()) protocol_error("rle", "rle entries must be integers");
      runs.push_back(r.get<std::int64_t>());
    }
    out[it->second][std::size_t(frame)] = rle_decode(runs, w, h);
  }
  for (std::size_t o = 0; o < seen.size(); ++o)
    for (std::size_t k = 0; k < n_frames; ++k)
      if (!seen[o][k])
        protocol_error(std::to_string(request.prompts[o].object_id),
                       "response lacks object " + std::to_string(request.prompts[o].object_id) + " on frame " +
                           std::to_string(k));
  return out;
}

json handle_segment_request(const json& body, SegmenterBackend& backend) {
  const DecodedSegmentRequest decoded(body);
  return encode_segment_response(decoded.request(), backend.segment(decoded.request(), decoded.params(), {}));
}

namespace {

struct SplitUrl {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path without trailing slash
};

SplitUrl split_url(const std::string& url) {
  const auto scheme = url.find("://");
  const auto path = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  SplitUrl s{url.substr(0, path), path == std::string::npos ? std::string() : url.substr(path)};
  while (!s.prefix.empty() && s.prefix.back() == '/') s.prefix.pop_back();
  return s;
}

}  // namespace

RemoteBackend::RemoteBackend(std::string base_url, std::string bearer_token, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), token_(std::move(bearer_token)), timeout_(timeout) {}

bool RemoteBackend::reachable() const {
  const SplitUrl u = split_url(base_url_);
  httplib::Client client(u.origin);
  if (!client.is_valid()) return false;
  client.set_connection_timeout(std::chrono::seconds(2));
  client.set_read_timeout(std::chrono::seconds(5));
  const auto res = client.Get(u.prefix + "/");
  return bool(res);
}

std::vector<Timeline> RemoteBackend::segment(const SegmenterRequest& request, const TrackerParams& params,
                                             const TrackControl& control) {
  control.checkpoint();
  const SplitUrl u = split_url(base_url_);
  httplib::Client client(u.origin);
  if (!client.is_valid())
    throw TrackingError("BackendUnreachable", base_url_, "invalid segmenter URL " + base_url_);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  if (!token_.empty()) client.set_bearer_token_auth(token_);

  control.log("sending " + std::to_string(request.frames.size()) + " frames to " + base_url_ + "/segment");
  const std::string body = encode_segment_request(request, params).dump();
  const auto res = client.Post(u.prefix + "/segment", body, "application/json");
  if (!res)
    throw TrackingError("BackendUnreachable", base_url_,
                        "segmenter at " + base_url_ + " is unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw TrackingError("BackendFailure", base_url_,
                        "segmenter at " + base_url_ + " answered HTTP " + std::to_string(res->status) + ": " +
                            res->body.substr(0, 500));
  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::parse_error& e) {
    throw TrackingError("BackendFailure", base_url_, std::string("segmenter reply is not JSON: ") + e.what());
  }
  try {
    std::vector<Timeline> out = decode_segment_response(reply, request);
    control.progress(int(request.frames.size()), int(request.frames.size()));
    return out;
  } catch (const TrackingError& e) {
    throw TrackingError("BackendFailure", base_url_, std::string("segmenter reply violates the protocol: ") + e.what());
  }
}

}  // namespace cystrack
