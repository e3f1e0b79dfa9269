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

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace cystrack {

/// A cyst bounding box drawn on the final frame.
struct CystPrompt {
  std::string cyst_id;
  PixelBox bbox;
  bool operator==(const CystPrompt&) const = default;
};

struct OrganoidAnnotation {
  std::string organoid_id;
  double anchor_x = 0.0;
  double anchor_y = 0.0;
  std::vector<CystPrompt> cysts;
  bool operator==(const OrganoidAnnotation&) const = default;
};

struct Calibration {
  double um_per_pixel = 1.0;
  double total_duration_hours = 1.0;
  int frame_count = 2;
  // Irregular acquisitions: when set, overrides the even spacing.
  std::optional<std::vector<double>> timestamps_hours;
  bool operator==(const Calibration&) const = default;
};

/// Prompts as loaded from (or saved to) an annotation document.
struct AnnotationSession {
  int frame_width = 0;
  int frame_height = 0;
  int annotated_frame_index = 0;
  std::vector<OrganoidAnnotation> organoids;
  Calibration calibration;
  bool operator==(const AnnotationSession&) const = default;
};

/// One cyst of a validated session with its dense indices resolved.
struct CystRef {
  int index = 0;           // dense, document order
  int organoid_index = 0;  // dense, document order
  std::string cyst_id;
  std::string organoid_id;
  PixelBox bbox;
  bool operator==(const CystRef&) const = default;
};

/// A session whose invariants have been checked against a concrete frame
/// sequence. Organoids and cysts carry dense integer indices in document
/// order; the original identifiers are kept as labels.
class ValidatedSession {
 public:
  const AnnotationSession& session() const { return session_; }
  const Calibration& calibration() const { return session_.calibration; }
  int frame_width() const { return session_.frame_width; }
  int frame_height() const { return session_.frame_height; }
  int frame_count() const { return session_.calibration.frame_count; }
  int organoid_count() const { return int(session_.organoids.size()); }
  int cyst_count() const { return int(cysts_.size()); }
  const std::vector<CystRef>& cysts() const { return cysts_; }
  const std::vector<double>& timestamps() const { return timestamps_; }

  bool operator==(const ValidatedSession&) const = default;

 private:
  friend ValidatedSession validate(const AnnotationSession&, int, int, int);
  AnnotationSession session_;
  std::vector<CystRef> cysts_;
  std::vector<double> timestamps_;
};

/// Checks every invariant of `session` against frames of the given size and
/// count. Throws AnnotationError with codes NoOrganoids, BadCalibration,
/// FrameMismatch, WrongAnnotatedFrame, DuplicateOrganoid, AnchorOutOfBounds,
/// BoxOutOfBounds, DuplicateCystAssignment or DuplicateBox; the error's
/// entity names the offending organoid or cyst.
ValidatedSession validate(const AnnotationSession& session, int frame_width, int frame_height,
                          int frame_count);

/// Validates against the dimensions and frame count the session declares.
ValidatedSession validate(const AnnotationSession& session);

/// Frame times in hours: i * total_duration / (frame_count - 1), unless an
/// explicit list is present. Throws AnnotationError("BadCalibration").
std::vector<double> timestamps(const Calibration& calibration);

// JSON document <-> session. Identifiers may be strings or integers in the
// document; they are stored as strings.
AnnotationSession annotation_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const AnnotationSession& session);

AnnotationSession load_annotation(const std::filesystem::path& path);
void save_annotation(const AnnotationSession& session, const std::filesystem::path& path);

}  // namespace cystrack
