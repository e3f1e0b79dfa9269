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

#include "cystrack/version.hpp"

#include <Eigen/Core>
#include <png.h>
#include <tiffvers.h>
#include <zlib.h>

#include <string>

namespace cystrack {

const char* version() { return CYSTRACK_VERSION; }

nlohmann::json library_versions() {
  return {{"cystrack", CYSTRACK_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"libpng", PNG_LIBPNG_VER_STRING},
          {"libtiff", std::to_string(TIFFLIB_VERSION)},
          {"zlib", ZLIB_VERSION}};
}

}  // namespace cystrack
