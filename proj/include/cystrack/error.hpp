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

#include <stdexcept>
#include <string>

namespace cystrack {

/// Which pipeline stage an error belongs to. The CLI maps these to exit codes.
enum class ErrorCategory { input, tracking, output, internal };

/// Base of every exception the library throws. `code()` is a stable
/// machine-readable identifier such as "BoxOutOfBounds"; `entity()` names the
/// offending object (a cyst id, a file path, a frame index) when there is one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, std::string code, std::string entity, const std::string& message)
      : std::runtime_error(message),
        category_(category),
        code_(std::move(code)),
        entity_(std::move(entity)) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& code() const noexcept { return code_; }
  const std::string& entity() const noexcept { return entity_; }

 private:
  ErrorCategory category_;
  std::string code_;
  std::string entity_;
};

class MaskError : public Error {
 public:
  MaskError(std::string code, const std::string& message)
      : Error(ErrorCategory::input, std::move(code), {}, message) {}
};

class AnnotationError : public Error {
 public:
  AnnotationError(std::string code, std::string entity, const std::string& message)
      : Error(ErrorCategory::input, std::move(code), std::move(entity), message) {}
};

class TrackingError : public Error {
 public:
  TrackingError(std::string code, std::string entity, const std::string& message)
      : Error(ErrorCategory::tracking, std::move(code), std::move(entity), message) {}
};

class IoError : public Error {
 public:
  IoError(ErrorCategory category, std::string path, const std::string& message)
      : Error(category, "IoFailure", std::move(path), message) {}
};

class SynthError : public Error {
 public:
  SynthError(std::string code, std::string entity, const std::string& message)
      : Error(ErrorCategory::input, std::move(code), std::move(entity), message) {}
};

const char* to_string(ErrorCategory c);

}  // namespace cystrack
