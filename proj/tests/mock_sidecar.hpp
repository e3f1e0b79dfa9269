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

// In-process segmenter sidecar speaking the wire protocol on localhost.
#pragma once

#include "cystrack/protocol.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <functional>
#include <string>
#include <thread>

namespace testsupport {

using nlohmann::json;

// Serves the baseline by default; `handler` may rewrite or replace replies.
struct MockSidecar {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> calls = 0;
  explicit MockSidecar(std::function<json(const json&)> handler = {}) {
    server.Post("/segment", [this, handler](const httplib::Request& req, httplib::Response& res) {
      ++calls;
      const json body = json::parse(req.body);
      cystrack::BaselineBackend baseline;
      const json reply = handler ? handler(body) : cystrack::handle_segment_request(body, baseline);
      res.set_content(reply.dump(), "application/json");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~MockSidecar() {
    server.stop();
    thread.join();
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace testsupport
