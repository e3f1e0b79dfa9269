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

#include "cystrack/error.hpp"

namespace cystrack {

const char* to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::input: return "input";
    case ErrorCategory::tracking: return "tracking";
    case ErrorCategory::output: return "output";
    case ErrorCategory::internal: return "internal";
  }
  return "internal";
}

}  // namespace cystrack
