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

#include <doctest.h>

#include <chrono>
#include <filesystem>
#include <thread>

#include <unistd.h>

#include "eabo/service.hpp"
#include "../support/service_replay.hpp"

using namespace eabo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eabo_service_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

json quick_config(double budget = 9.0, const std::string& bench = "branin") {
  return {{"benchmark", bench},
          {"costs", {{"budget", budget}}},
          {"seed", 5},
          {"surrogate", {{"cold_steps", 150}, {"warm_steps", 60}}},
          {"acquisition", {{"restarts", 4}, {"steps", 40}, {"utility_candidates", 128}, {"utility_steps", 30}}}};
}

}  // namespace

TEST_CASE("an HTTP replay of the simulated oracle reproduces the batch trajectory") {
  const fs::path dir = scratch("replay");
  const json cfg = quick_config();
  const RunConfig config = run_config_from_json(cfg);
  const std::string expected = trajectory_to_csv(run(config).steps);

  SessionService service(dir);
  testing::LiveServer server(service);
  httplib::Client client("127.0.0.1", server.port());
  testing::HttpReply created = testing::http(client, "POST", "/v1/sessions", {{"config", cfg}});
  REQUIRE(created.status == 201);
  const std::string id = created.body["id"];
  json reply = created.body;
  int answered = 0;
  while (reply["status"] == "awaiting_response") {
    const json answer = testing::simulated_answer(config, reply["query"]);
    const testing::HttpReply r = testing::http(client, "POST", "/v1/sessions/" + id + "/response", answer);
    REQUIRE(r.status == 200);
    reply = r.body;
    ++answered;
  }
  CHECK(reply["status"] == "finished");
  const testing::HttpReply exported = testing::http(client, "GET", "/v1/sessions/" + id + "/export");
  REQUIRE(exported.status == 200);
  CHECK(exported.body["trajectory_csv"].get<std::string>() == expected);
  CHECK(exported.body["transcript"].size() == static_cast<std::size_t>(answered));
  fs::remove_all(dir);
}

TEST_CASE("responses are validated, replays are idempotent, and state is reported") {
  const fs::path dir = scratch("errors");
  SessionService service(dir);
  const ServiceReply created = service.create({{"config", quick_config(12.0)}});
  REQUIRE(created.status == 201);
  const std::string id = created.body["id"];
  const json query = created.body["query"];
  const bool is_comp = query["action_type"] == "compare";
  const json good = is_comp ? json{{"iteration", 0}, {"d", 1}} : json{{"iteration", 0}, {"y", {0.5}}};
  const json wrong_type = is_comp ? json{{"iteration", 0}, {"y", {0.5}}} : json{{"iteration", 0}, {"d", 1}};

  CHECK(service.get("0123").status == 404);
  CHECK(service.get("../../etc/passwd").status == 404);
  CHECK(service.get(std::string(32, 'a')).status == 404);
  CHECK(service.respond(id, json{{"d", 1}}).body["field"] == "iteration");
  CHECK(service.respond(id, json{{"iteration", 0}}).status == 400);
  CHECK(service.respond(id, json{{"iteration", 0}, {"d", 1}, {"y", {1.0}}}).status == 400);
  const ServiceReply mismatch = service.respond(id, wrong_type);
  CHECK(mismatch.status == 409);
  CHECK(mismatch.body["code"] == "type_mismatch");
  const ServiceReply stale = service.respond(id, json{{"iteration", 3}, {"d", 1}, {"wait", true}});
  CHECK(stale.status == 409);
  CHECK(stale.body["code"] == "stale_iteration");
  if (is_comp) CHECK(service.respond(id, json{{"iteration", 0}, {"d", 2}}).status == 400);

  const ServiceReply first = service.respond(id, good);
  REQUIRE(first.status == 200);
  const double spent = first.body["budget"]["spent"];
  const ServiceReply replay = service.respond(id, good);
  CHECK(replay.status == 200);
  CHECK(replay.body == first.body);
  CHECK(service.get(id).body["budget"]["spent"] == spent);
  const json different = is_comp ? json{{"iteration", 0}, {"d", 0}} : json{{"iteration", 0}, {"y", {0.25}}};
  CHECK(service.respond(id, different).body["code"] == "conflict");

  const ServiceReply state = service.state(id);
  REQUIRE(state.status == 200);
  CHECK(state.body["dataset"]["n_eval"].get<int>() + state.body["dataset"]["n_comp"].get<int>() == 1);
  CHECK(state.body["trajectory"].size() == 1);
  CHECK(state.body["recommendation"].contains("expected_utility"));
  const json& slice = state.body["posterior_slice"];
  CHECK(slice["kind"] == "grid");
  CHECK(slice["axis"].size() == 21);
  CHECK(slice["mean"][0].size() == 441);
  CHECK(slice["sd"][0].size() == 441);

  CHECK(service.abandon(id).body["status"] == "abandoned");
  CHECK(service.respond(id, json{{"iteration", 1}, {"d", 1}}).body["code"] == "session_closed");
  CHECK(service.respond(id, good).status == 200);  // answered iterations still replay

  const ServiceReply bad = service.create({{"config", {{"benchmark", "branin"}, {"costs", {{"c_eval", -2}}}}}});
  CHECK(bad.status == 400);
  CHECK(bad.body["code"] == "invalid_config");
  CHECK(bad.body["field"] == "config.costs.c_eval");
  fs::remove_all(dir);
}

TEST_CASE("sessions survive a restart and continue identically") {
  const fs::path dir = scratch("restart");
  const json cfg = quick_config(8.0);
  const RunConfig config = run_config_from_json(cfg);
  const std::string expected = trajectory_to_csv(run(config).steps);
  std::string id;
  json reply;
  {
    SessionService service(dir);
    const ServiceReply created = service.create({{"config", cfg}});
    id = created.body["id"];
    reply = created.body;
    for (int i = 0; i < 2 && reply["status"] == "awaiting_response"; ++i) {
      reply = service.respond(id, testing::simulated_answer(config, reply["query"])).body;
    }
  }
  CHECK(fs::exists(dir / (id + ".json")));
  SessionService restarted(dir);
  const ServiceReply again = restarted.get(id);
  REQUIRE(again.status == 200);
  CHECK(again.body == reply);
  reply = again.body;
  while (reply["status"] == "awaiting_response") {
    reply = restarted.respond(id, testing::simulated_answer(config, reply["query"])).body;
  }
  CHECK(restarted.export_session(id).body["trajectory_csv"].get<std::string>() == expected);
  fs::remove_all(dir);
}

TEST_CASE("background computation reports computing then awaits a response") {
  const fs::path dir = scratch("async");
  SessionService service(dir);
  const ServiceReply created = service.create({{"config", quick_config(6.0, "hartmann6")}, {"wait", false}});
  CHECK(created.status == 202);
  CHECK(created.body["status"] == "computing");
  const std::string id = created.body["id"];
  service.wait_idle();
  const ServiceReply state = service.state(id);
  CHECK(state.body["status"] == "awaiting_response");
  const json& slice = state.body["posterior_slice"];
  CHECK(slice["kind"] == "profiles");
  CHECK(slice["profiles"].size() == 6);
  CHECK(slice["profiles"][0]["mean"][0].size() == 21);
  fs::remove_all(dir);
}

TEST_CASE("http layer maps errors to JSON bodies") {
  const fs::path dir = scratch("http");
  SessionService service(dir);
  testing::LiveServer server(service);
  httplib::Client client("127.0.0.1", server.port());
  const auto missing = testing::http(client, "GET", "/v1/sessions/" + std::string(32, 'b') + "/state");
  CHECK(missing.status == 404);
  CHECK(missing.body["code"] == "not_found");
  const auto route = testing::http(client, "GET", "/v2/whatever");
  CHECK(route.status == 404);
  CHECK(route.body["code"] == "not_found");
  httplib::Result raw = client.Post("/v1/sessions", "{not json", "application/json");
  REQUIRE(raw);
  CHECK(raw->status == 400);
  CHECK(json::parse(raw->body)["code"] == "invalid_json");
  fs::remove_all(dir);
}
