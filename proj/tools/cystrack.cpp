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

#include "cystrack/annotation.hpp"
#include "cystrack/image_io.hpp"
#include "cystrack/pipeline.hpp"
#include "cystrack/protocol.hpp"
#include "cystrack/service.hpp"
#include "cystrack/synth.hpp"
#include "cystrack/version.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace cystrack;

namespace {

// Exit codes.
constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kInputError = 2;
constexpr int kTrackingError = 3;
constexpr int kOutputError = 4;
constexpr int kInternalError = 5;

int exit_code(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::input: return kInputError;
    case ErrorCategory::tracking: return kTrackingError;
    case ErrorCategory::output: return kOutputError;
    case ErrorCategory::internal: return kInternalError;
  }
  return kInternalError;
}

// One JSON line on stderr, then the human message through the logger.
int report_error(ErrorCategory category, const std::string& code, const std::string& entity,
                 const std::string& message) {
  const nlohmann::json line = {
      {"error", {{"category", to_string(category)}, {"code", code}, {"entity", entity}, {"message", message}}}};
  std::cerr << line.dump() << std::endl;
  return exit_code(category);
}

struct RunArgs {
  std::string frames, annotations, backend = "baseline", remote_url, out, quality, params;
  std::optional<double> iou_floor, search_margin;
  std::optional<int> min_area_px;
};

int cmd_run(const RunArgs& a) {
  PipelineParams params;
  if (!a.params.empty()) params = load_params(a.params);
  if (!a.quality.empty()) params.quality = parse_quality(a.quality);
  if (a.iou_floor) params.tracker.iou_floor = *a.iou_floor;
  if (a.search_margin) params.tracker.search_margin = *a.search_margin;
  if (a.min_area_px) params.tracker.min_area_px = *a.min_area_px;

  const PipelineInputs inputs = load_inputs(a.frames, a.annotations);

  std::unique_ptr<SegmenterBackend> backend;
  if (a.backend == "remote") {
    const std::string url = !a.remote_url.empty() ? a.remote_url : config_from_env().remote_url;
    if (url.empty())
      throw Error(ErrorCategory::input, "RemoteNotConfigured", "--remote-url",
                  "--backend remote needs --remote-url or REMOTE_SEGMENTER_URL");
    backend = std::make_unique<RemoteBackend>(url);
  } else {
    backend = std::make_unique<BaselineBackend>();
  }

  TrackControl control;
  control.on_log = [](std::string_view line) { spdlog::info("{}", line); };
  control.on_progress = [](int done, int total) { spdlog::debug("frame {}/{}", done, total); };
  const RunResult r = run_pipeline(inputs, *backend, params, a.out, control);
  spdlog::info("{} artifacts in {}", r.manifest.at("artifacts").size(), a.out);
  return kOk;
}

int cmd_validate(const std::string& annotations, const std::string& frames) {
  const AnnotationSession s = load_annotation(annotations);
  ValidatedSession v;
  if (frames.empty()) {
    v = validate(s);
  } else {
    const FrameSequence seq = io::load_frame_directory(frames);
    v = validate(s, seq.width(), seq.height(), seq.size());
  }
  std::printf("%d organoids, %d cysts, OK\n", v.organoid_count(), v.cyst_count());
  return kOk;
}

int cmd_synth_render(const std::string& scenario, const std::string& out, std::optional<std::uint64_t> seed) {
  Scenario sc = fs::exists(scenario) ? load_scenario(scenario) : builtin_scenario(scenario);
  if (seed) sc.seed = *seed;
  const SynthOutput rendered = render(sc);
  write_synth_output(rendered, sc, out);
  spdlog::info("scenario '{}': {} frames, {} objects written to {}", sc.name, sc.frame_count, sc.objects.size(), out);
  return kOk;
}

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

int cmd_serve(std::string bind, const std::string& data_dir, int workers) {
  ServiceConfig cfg = config_from_env();
  if (!data_dir.empty()) cfg.data_dir = data_dir;
  cfg.workers = workers;
  if (bind.empty()) {
    const char* env = std::getenv("BIND_ADDR");
    bind = env && *env ? env : "127.0.0.1:8080";
  }
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos)
    throw Error(ErrorCategory::input, "BadBindAddress", bind, "bind address must be host:port, got '" + bind + "'");
  const std::string host = bind.substr(0, colon);
  const int port = std::atoi(bind.c_str() + colon + 1);

  Service service(cfg);
  httplib::Server server;
  mount_routes(server, service);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  spdlog::info("serving /api/v1 on {} (data in {}, auth {})", bind, cfg.data_dir.string(),
               cfg.auth_token.empty() ? "disabled" : "enabled");
  if (!server.listen(host, port))
    throw Error(ErrorCategory::output, "BindFailed", bind, "cannot listen on " + bind);
  g_server = nullptr;
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse temporal tracking and morphometry of cysts in time-lapse microscopy"};
  app.set_version_flag("--version", std::string("cystrack ") + version());
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "off"}));
  app.require_subcommand(1);

  RunArgs run;
  CLI::App* run_cmd = app.add_subcommand("run", "validate, track, measure and write a report");
  run_cmd->add_option("--frames", run.frames, "directory of frame_NNNN.png/.tif files")->required();
  run_cmd->add_option("--annotations", run.annotations, "annotation JSON file")->required();
  run_cmd->add_option("--backend", run.backend, "segmenter backend")->check(CLI::IsMember({"baseline", "remote"}));
  run_cmd->add_option("--remote-url", run.remote_url, "sidecar base URL (POST <url>/segment)");
  run_cmd->add_option("--out", run.out, "report directory")->required();
  run_cmd->add_option("--quality", run.quality, "overlay quality")->check(CLI::IsMember({"preview", "full"}));
  run_cmd->add_option("--params", run.params, "JSON params file");
  run_cmd->add_option("--iou-floor", run.iou_floor, "overrides the params file");
  run_cmd->add_option("--min-area-px", run.min_area_px, "overrides the params file");
  run_cmd->add_option("--search-margin", run.search_margin, "overrides the params file");

  std::string v_annotations, v_frames;
  CLI::App* validate_cmd = app.add_subcommand("validate", "check an annotation file");
  validate_cmd->add_option("--annotations,annotations", v_annotations, "annotation JSON file")->required();
  validate_cmd->add_option("--frames", v_frames, "validate against this frame directory");

  CLI::App* synth_cmd = app.add_subcommand("synth", "synthetic time-lapses with ground truth");
  synth_cmd->require_subcommand(1);
  std::string s_scenario, s_out;
  std::optional<std::uint64_t> s_seed;
  CLI::App* render_cmd = synth_cmd->add_subcommand("render", "render a scenario");
  render_cmd->add_option("--scenario", s_scenario, "built-in name or scenario JSON file")->required();
  render_cmd->add_option("--out", s_out, "output directory")->required();
  render_cmd->add_option("--seed", s_seed, "override the scenario seed");
  CLI::App* list_cmd = synth_cmd->add_subcommand("list", "list built-in scenarios");

  std::string bind, data_dir;
  int workers = 1;
  CLI::App* serve_cmd = app.add_subcommand("serve", "HTTP service under /api/v1");
  serve_cmd->add_option("--bind", bind, "host:port (default BIND_ADDR or 127.0.0.1:8080)");
  serve_cmd->add_option("--data-dir", data_dir, "data directory (default DATA_DIR or ./data)");
  serve_cmd->add_option("--workers", workers, "concurrent jobs")->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  auto logger = spdlog::stderr_color_mt("cystrack");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*run_cmd) return cmd_run(run);
    if (*validate_cmd) return cmd_validate(v_annotations, v_frames);
    if (*render_cmd) return cmd_synth_render(s_scenario, s_out, s_seed);
    if (*list_cmd) {
      for (const std::string& n : builtin_scenario_names()) std::printf("%s\n", n.c_str());
      return kOk;
    }
    if (*serve_cmd) return cmd_serve(bind, data_dir, workers);
  } catch (const Error& e) {
    return report_error(e.category(), e.code(), e.entity(), e.what());
  } catch (const std::exception& e) {
    return report_error(ErrorCategory::internal, "Internal", "", e.what());
  }
  return kUsage;
}
