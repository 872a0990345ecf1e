// Copyright 2026 The eabo Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// eabo: command-line front end.
//
//   eabo run    --config run.json   --out results/branin_s0 [--seed N] [--policy P] [--force]
//   eabo sweep  --config sweep.json --out results/sweep [--parallel N] [--force]
//   eabo report --results results/sweep --out results/report
//   eabo serve  --data-dir sessions [--host 127.0.0.1] [--port 8080]
//
// Exit codes: 0 success, 2 invalid input, 3 oracle failure, 1 anything else.

#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "eabo/driver.hpp"
#include "eabo/errors.hpp"
#include "eabo/experiments.hpp"
#include "eabo/log.hpp"
#include "eabo/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitValidation = 2;
constexpr int kExitOracle = 3;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw eabo::ValidationError("--config", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw eabo::ValidationError("--config", path + ": " + e.what());
  }
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& policy,
            const std::string& out, bool force) {
  json doc = read_json(config_path);
  if (seed) doc["seed"] = *seed;
  if (!policy.empty()) doc["policy"] = policy;
  const eabo::RunConfig config = eabo::run_config_from_json(doc);
  for (const char* ext : {".csv", ".json"}) {
    if (!force && fs::exists(out + ext)) {
      throw eabo::ValidationError("--out", out + ext + " already exists; pass --force to overwrite");
    }
  }
  if (const fs::path parent = fs::path(out).parent_path(); !parent.empty()) fs::create_directories(parent);
  const eabo::RunResult result = eabo::run(config);
  eabo::write_run_files(out, config, result);
  if (!result.complete) {
    std::cerr << "oracle failure: " << result.error << "\n";
    return kExitOracle;
  }
  std::cout << "spent " << eabo::format_number(result.spent) << " over " << result.steps.size() << " steps";
  if (result.final_norm_utility) std::cout << ", final normalized utility " << *result.final_norm_utility;
  std::cout << "\n";
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::string& out, int parallel, bool force) {
  const eabo::SweepSpec spec = eabo::sweep_spec_from_json(read_json(config_path));
  const eabo::SweepOutcome outcome = eabo::run_sweep(spec, out, parallel, force);
  std::cout << outcome.runs << " runs, " << outcome.failed << " failed\n";
  return outcome.failed > 0 ? kExitOracle : kExitOk;
}

int cmd_report(const std::string& results, const std::string& out) {
  if (!fs::is_directory(results)) throw eabo::ValidationError("--results", results + " is not a directory");
  for (const fs::path& p : eabo::write_report(results, out)) std::cout << p.string() << "\n";
  return kExitOk;
}

int cmd_serve(const std::string& data_dir, const std::string& host, int port) {
  if (port < 0 || port > 65535) throw eabo::ValidationError("--port", "must be in 0..65535 (0 picks a free port)");
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread waiter([signals] {
    int sig = 0;
    sigwait(&signals, &sig);
    if (sig != 0) eabo::stop_server();
  });
  eabo::SessionService service(data_dir);
  try {
    eabo::run_server(service, host, port,
                     [&](int bound) { std::cout << "serving on http://" << host << ":" << bound << std::endl; });
  } catch (...) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    throw;
  }
  waiter.join();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  eabo::init_logging_from_env();
  CLI::App app{"Expert-augmented Bayesian optimization"};
  app.require_subcommand(1);

  std::string config, out, policy, results, data_dir = "sessions", host = "127.0.0.1";
  std::optional<std::uint64_t> seed;
  bool force = false;
  int parallel = 1, port = 8080;

  auto* run = app.add_subcommand("run", "Run one campaign against a simulated benchmark");
  run->add_option("--config", config, "Run config JSON")->required();
  run->add_option("--out", out, "Output stem; writes <stem>.csv and <stem>.json")->required();
  run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--policy", policy, "Override the policy (ea-bo, kg-eval, kg-comp, rand-eval, rand-comp)");
  run->add_flag("--force", force, "Overwrite existing outputs");

  auto* sweep = app.add_subcommand("sweep", "Run a grid of campaigns");
  sweep->add_option("--config", config, "Sweep spec JSON")->required();
  sweep->add_option("--out", out, "Output directory")->required();
  sweep->add_option("--parallel", parallel, "Worker threads");
  sweep->add_flag("--force", force, "Overwrite a non-empty output directory");

  auto* report = app.add_subcommand("report", "Mean best-so-far curves from trajectory files");
  report->add_option("--results", results, "Directory searched for trajectory CSVs")->required();
  report->add_option("--out", out, "Output directory")->required();

  auto* serve = app.add_subcommand("serve", "Serve the elicitation session API");
  serve->add_option("--data-dir", data_dir, "Session storage directory");
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port, "Listen port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*run) return cmd_run(config, seed, policy, out, force);
    if (*sweep) return cmd_sweep(config, out, parallel, force);
    if (*report) return cmd_report(results, out);
    if (*serve) return cmd_serve(data_dir, host, port);
  } catch (const eabo::ValidationError& e) {
    std::cerr << "invalid input: " << e.what() << "\n";
    return kExitValidation;
  } catch (const eabo::EmptyResults& e) {
    std::cerr << "no results: " << e.what() << "\n";
    return kExitValidation;
  } catch (const eabo::OracleFailure& e) {
    std::cerr << "oracle failure: " << e.what() << "\n";
    return kExitOracle;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitOther;
  }
  return kExitOther;
}
