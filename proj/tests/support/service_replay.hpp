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

#pragma once

#include <future>
#include <stdexcept>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "eabo/benchmarks.hpp"
#include "eabo/driver.hpp"
#include "eabo/service.hpp"
#include "eabo/state_json.hpp"

namespace eabo::testing {

/// A SessionService behind a real HTTP listener on a free local port.
class LiveServer {
 public:
  explicit LiveServer(SessionService& service) {
    std::promise<int> bound;
    auto ready = bound.get_future();
    thread_ = std::thread([&service, &bound] { run_server(service, "127.0.0.1", 0, [&](int p) { bound.set_value(p); }); });
    port_ = ready.get();
  }
  ~LiveServer() {
    stop_server();
    thread_.join();
  }
  int port() const { return port_; }

 private:
  std::thread thread_;
  int port_ = 0;
};

struct HttpReply {
  int status = 0;
  nlohmann::json body;
};

inline HttpReply http(httplib::Client& client, const std::string& method, const std::string& path,
                      const nlohmann::json& body = nullptr) {
  httplib::Result r = method == "GET" ? client.Get(path) : client.Post(path, body.is_null() ? "" : body.dump(), "application/json");
  if (!r) throw std::runtime_error("HTTP " + method + " " + path + " failed: " + httplib::to_string(r.error()));
  return {r->status, r->body.empty() ? nlohmann::json() : nlohmann::json::parse(r->body)};
}

/// Answers `query` the way the batch driver's simulated oracle would.
inline nlohmann::json simulated_answer(const RunConfig& config, const nlohmann::json& query) {
  const Benchmark& bench = Benchmark::get(config.benchmark);
  SimulatedOracle oracle(bench, config.build_utility(), config.noise.sigma_eval, config.noise.sigma_comp);
  const int iter = query.at("iteration").get<int>();
  const auto& coords = query.at("coordinates");
  nlohmann::json answer{{"iteration", iter}};
  if (query.at("action_type") == "evaluate") {
    const Eigen::VectorXd x = vector_from_json(coords.at("x"), "x");
    answer["y"] = vector_to_json(oracle.evaluate(x, oracle_seed(config, iter, Source::Evaluate)));
  } else {
    const Eigen::VectorXd a = vector_from_json(coords.at("x_a"), "x_a");
    const Eigen::VectorXd b = vector_from_json(coords.at("x_b"), "x_b");
    answer["d"] = oracle.compare(a, b, oracle_seed(config, iter, Source::Compare));
  }
  return answer;
}

}  // namespace eabo::testing
