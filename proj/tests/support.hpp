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

// Helpers shared by the unit tests and the acceptance runner.
#pragma once

#include "cystrack/mask.hpp"
#include "cystrack/tracking.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <filesystem>
#include <random>
#include <string>

namespace testsupport {

// Mean IoU of `got` against `truth` over the frames where the truth is
// present; a missing mask scores 0 there.
inline double mean_iou(const cystrack::CystTrack& got, const cystrack::CystTrack& truth) {
  double sum = 0.0;
  int n = 0;
  for (std::size_t f = 0; f < truth.masks.size(); ++f) {
    if (!truth.masks[f]) continue;
    sum += got.masks[f] ? cystrack::iou(*got.masks[f], *truth.masks[f]) : 0.0;
    ++n;
  }
  return n ? sum / n : 1.0;
}

inline bool monotone(const cystrack::Timeline& t) {
  bool seen = false;
  for (const auto& m : t) {
    if (m) seen = true;
    else if (seen) return false;
  }
  return true;
}

// Random timeline with 1x1 masks; the mask value tags the position.
inline cystrack::Timeline random_timeline(std::mt19937& rng) {
  std::uniform_int_distribution<int> len(0, 12);
  std::bernoulli_distribution coin(0.6);
  cystrack::Timeline t(std::size_t(len(rng)));
  for (std::size_t i = 0; i < t.size(); ++i)
    if (coin(rng)) {
      cystrack::BinaryMask m(1, int(i) + 1);
      m.setZero();
      m(0, int(i)) = true;
      t[i] = m;
    }
  return t;
}

inline bool same(const cystrack::Timeline& a, const cystrack::Timeline& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (bool(a[i]) != bool(b[i])) return false;
    if (a[i] && (a[i]->cols() != b[i]->cols() || (*a[i] != *b[i]).any())) return false;
  }
  return true;
}

// A localhost port nothing listens on (bound once, then released).
inline int unused_port() {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
  socklen_t len = sizeof addr;
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  ::close(fd);
  return ntohs(addr.sin_port);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path p = std::filesystem::temp_directory_path() / ("cystrack-" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace testsupport
