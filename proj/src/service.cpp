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

#include "eabo/service.hpp"

#include <atomic>
#include <fstream>
#include <functional>
#include <random>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "eabo/errors.hpp"
#include "eabo/state_json.hpp"

namespace eabo {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

ServiceReply error_reply(int status, std::string code, const std::string& message, const std::string& field = "") {
  json body{{"code", std::move(code)}, {"message", message}};
  if (!field.empty()) body["field"] = field;
  return {status, body};
}

bool valid_id(const std::string& id) {
  if (id.size() != 32) return false;
  return std::all_of(id.begin(), id.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); });
}

std::string new_id() {
  std::random_device rd;
  std::string id;
  static constexpr char hex[] = "0123456789abcdef";
  for (int i = 0; i < 32; ++i) id += hex[rd() % 16];
  return id;
}

SessionStatus parse_status(const std::string& s) {
  if (s == "awaiting_response") return SessionStatus::AwaitingResponse;
  if (s == "computing") return SessionStatus::Computing;
  if (s == "finished") return SessionStatus::Finished;
  if (s == "abandoned") return SessionStatus::Abandoned;
  throw ValidationError("status", "unknown session status '" + s + "'");
}

json recommendation_json(const Campaign& c) {
  json r{{"x", vector_to_json(c.recommendation())}, {"expected_utility", c.recommendation_value()}};
  const auto norm = c.norm_utility();
  r["norm_utility"] = norm ? json(*norm) : json(nullptr);
  return r;
}

json budget_json(const Campaign& c) {
  return {{"total", c.config().costs.budget}, {"spent", c.spent()}, {"remaining", c.remaining()}};
}

// Normalized response payload used for idempotency comparisons.
json response_payload(const json& body) {
  if (body.contains("d")) return {{"d", body["d"]}};
  return {{"y", body["y"]}};
}

}  // namespace

std::string_view session_status_name(SessionStatus status) {
  switch (status) {
    case SessionStatus::AwaitingResponse: return "awaiting_response";
    case SessionStatus::Computing: return "computing";
    case SessionStatus::Finished: return "finished";
    case SessionStatus::Abandoned: return "abandoned";
  }
  return "";
}

struct SessionService::Session {
  std::string id;
  std::mutex mutex;  // one writer at a time
  SessionStatus status = SessionStatus::Computing;
  json config;
  std::optional<Campaign> campaign;
  std::vector<json> transcript;  // {"iteration", "action", "response", "reply"}
  json in_flight;                // response being processed, or null
  std::string error;

  mutable std::mutex snapshot_mutex;
  std::shared_ptr<const json> published;  // {"summary", "state", "export"}

  std::shared_ptr<const json> view() const {
    std::lock_guard lock(snapshot_mutex);
    return published;
  }
};

json query_message(const std::string& session_id, const Campaign& campaign) {
  const auto& p = campaign.pending();
  if (!p) return nullptr;
  json q{{"session_id", session_id},
         {"iteration", p->iter},
         {"action_type", source_name(p->action.type)},
         {"cost", p->action.cost},
         {"remaining_budget", campaign.remaining()},
         {"voi_eval_raw", p->voi_eval_raw ? json(*p->voi_eval_raw) : json(nullptr)},
         {"voi_comp_raw", p->voi_comp_raw ? json(*p->voi_comp_raw) : json(nullptr)},
         {"chosen_source", p->chosen_source}};
  if (p->action.type == Source::Evaluate) {
    q["coordinates"] = {{"x", vector_to_json(p->action.x)}};
    q["prompt"] = "Run the experiment at x and report the measured outputs y.";
  } else {
    q["coordinates"] = {{"x_a", vector_to_json(p->action.x)}, {"x_b", vector_to_json(p->action.x_b)}};
    q["prompt"] = "Is design x_a better than design x_b? Answer d = 1 for x_a, d = 0 for x_b.";
  }
  return q;
}

json posterior_slice(const Campaign& campaign) {
  const Posterior post(campaign.state());
  const int d = post.dim();
  const int m = post.outputs();
  std::vector<double> axis(kSliceGridPoints);
  for (int i = 0; i < kSliceGridPoints; ++i) axis[i] = i / double(kSliceGridPoints - 1);
  auto moments_at = [&](const Eigen::VectorXd& x, json& mean, json& sd) {
    const Eigen::VectorXd mu = post.mean(x);
    const Eigen::VectorXd var = post.variance(x);
    for (int j = 0; j < m; ++j) {
      mean[j].push_back(mu(j));
      sd[j].push_back(std::sqrt(std::max(var(j), 0.0)));
    }
  };
  json out;
  if (d <= 2) {
    out["kind"] = "grid";
    out["axis"] = axis;
    json mean = json::array(), sd = json::array();
    for (int j = 0; j < m; ++j) {
      mean.push_back(json::array());
      sd.push_back(json::array());
    }
    // Row-major over (x_1, x_2): index i * 21 + k for d = 2.
    if (d == 1) {
      for (double a : axis) moments_at(Eigen::VectorXd::Constant(1, a), mean, sd);
    } else {
      for (double a : axis) {
        for (double b : axis) moments_at(Eigen::Vector2d(a, b), mean, sd);
      }
    }
    out["mean"] = mean;
    out["sd"] = sd;
  } else {
    out["kind"] = "profiles";
    out["axis"] = axis;
    out["through"] = vector_to_json(campaign.recommendation());
    json profiles = json::array();
    for (int k = 0; k < d; ++k) {
      json mean = json::array(), sd = json::array();
      for (int j = 0; j < m; ++j) {
        mean.push_back(json::array());
        sd.push_back(json::array());
      }
      for (double a : axis) {
        Eigen::VectorXd x = campaign.recommendation();
        x(k) = a;
        moments_at(x, mean, sd);
      }
      profiles.push_back({{"coordinate", k}, {"mean", mean}, {"sd", sd}});
    }
    out["profiles"] = profiles;
  }
  return out;
}

SessionService::SessionService(fs::path data_dir) : dir_(std::move(data_dir)) { fs::create_directories(dir_); }

SessionService::~SessionService() { wait_idle(); }

void SessionService::wait_idle() {
  std::unique_lock lock(tasks_mutex_);
  tasks_cv_.wait(lock, [&] { return running_tasks_ == 0; });
}

void SessionService::launch(std::shared_ptr<Session> s, std::function<void()> work) {
  {
    std::lock_guard lock(tasks_mutex_);
    ++running_tasks_;
  }
  std::thread([this, s = std::move(s), work = std::move(work)]() {
    work();
    std::lock_guard lock(tasks_mutex_);
    --running_tasks_;
    tasks_cv_.notify_all();
  }).detach();
}

json SessionService::summary(const Session& s) const {
  json body{{"id", s.id}, {"status", session_status_name(s.status)}};
  if (s.campaign) {
    body["iteration"] = s.campaign->iteration();
    body["budget"] = budget_json(*s.campaign);
    body["query"] = s.status == SessionStatus::AwaitingResponse ? query_message(s.id, *s.campaign) : json(nullptr);
    body["recommendation"] = recommendation_json(*s.campaign);
  } else {
    body["iteration"] = 0;
    body["query"] = nullptr;
  }
  if (!s.error.empty()) body["error"] = s.error;
  return body;
}

json SessionService::snapshot(const Session& s) const {
  json state = summary(s);
  json exported{{"id", s.id}, {"status", session_status_name(s.status)}, {"config", s.config}};
  if (s.campaign) {
    const Campaign& c = *s.campaign;
    const json full = c.to_json();
    state["dataset"] = {{"n_eval", c.data().evals.size()}, {"n_comp", c.data().comps.size()}};
    state["trajectory"] = full.at("steps");
    state["posterior_slice"] = posterior_slice(c);
    exported["config"] = full.at("config");
    exported["trajectory_csv"] = trajectory_to_csv(c.trajectory());
  } else {
    state["dataset"] = {{"n_eval", 0}, {"n_comp", 0}};
    state["trajectory"] = json::array();
    exported["trajectory_csv"] = trajectory_to_csv({});
  }
  json transcript = json::array();
  for (const json& t : s.transcript) {
    transcript.push_back({{"iteration", t.at("iteration")}, {"action", t.at("action")}, {"response", t.at("response")}});
  }
  exported["transcript"] = transcript;
  exported["complete"] = s.status == SessionStatus::Finished;
  return {{"summary", summary(s)}, {"state", state}, {"export", exported}};
}

void SessionService::persist(const Session& s) const {
  json doc{{"schema_version", kSessionSchemaVersion},
           {"id", s.id},
           {"status", session_status_name(s.status)},
           {"config", s.config},
           {"campaign", s.campaign ? s.campaign->to_json() : json(nullptr)},
           {"transcript", s.transcript},
           {"in_flight", s.in_flight},
           {"error", s.error}};
  const fs::path path = dir_ / (s.id + ".json");
  const fs::path tmp = dir_ / (s.id + ".json.tmp");
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    f << doc.dump();
    f.flush();
    if (!f) throw Error("cannot write session file " + tmp.string());
  }
  fs::rename(tmp, path);
  auto published = std::make_shared<const json>(snapshot(s));
  std::lock_guard lock(s.snapshot_mutex);
  const_cast<Session&>(s).published = std::move(published);
}

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) {
  if (!valid_id(id)) return nullptr;
  std::lock_guard lock(mutex_);
  if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;
  const fs::path path = dir_ / (id + ".json");
  if (!fs::exists(path)) return nullptr;
  std::ifstream in(path);
  const json doc = json::parse(in);
  auto s = std::make_shared<Session>();
  s->id = id;
  s->status = parse_status(doc.at("status").get<std::string>());
  s->config = doc.at("config");
  if (!doc.at("campaign").is_null()) s->campaign = Campaign::from_json(doc.at("campaign"));
  s->transcript = doc.at("transcript").get<std::vector<json>>();
  s->in_flight = doc.at("in_flight");
  s->error = doc.value("error", "");
  // Finish work that a previous process started but did not complete.
  if (s->status == SessionStatus::Computing) {
    if (!s->campaign) {
      s->campaign.emplace(run_config_from_json(s->config, false));
    } else if (!s->in_flight.is_null()) {
      const json& r = s->in_flight.at("response");
      Outcome o;
      if (r.contains("d")) {
        o.d = r["d"].get<int>();
      } else {
        o.y = vector_from_json(r["y"], "y");
      }
      const json action = query_message(id, *s->campaign);
      s->campaign->submit(o);
      s->status = s->campaign->finished() ? SessionStatus::Finished : SessionStatus::AwaitingResponse;
      s->transcript.push_back({{"iteration", s->in_flight.at("iteration")},
                               {"action", action},
                               {"response", r},
                               {"reply", summary(*s)}});
      s->in_flight = nullptr;
    }
    s->status = s->campaign->finished() ? SessionStatus::Finished : SessionStatus::AwaitingResponse;
  }
  persist(*s);
  sessions_[id] = s;
  return s;
}

ServiceReply SessionService::create(const json& body) {
  if (!body.is_object()) return error_reply(400, "invalid_request", "body must be a JSON object");
  if (!body.contains("config")) return error_reply(400, "invalid_config", "config is required", "config");
  for (const auto& [key, value] : body.items()) {
    if (key != "config" && key != "wait") return error_reply(400, "invalid_request", "unknown key", key);
  }
  const bool wait = body.value("wait", true);
  RunConfig config;
  try {
    config = run_config_from_json(body["config"], false);
  } catch (const ValidationError& e) {
    return error_reply(400, "invalid_config", e.what(), "config." + e.field());
  } catch (const json::exception& e) {
    return error_reply(400, "invalid_config", e.what(), "config");
  }
  auto s = std::make_shared<Session>();
  {
    std::lock_guard lock(mutex_);
    do {
      s->id = new_id();
    } while (sessions_.count(s->id) || fs::exists(dir_ / (s->id + ".json")));
    sessions_[s->id] = s;
  }
  s->config = run_config_to_json(config);
  std::unique_lock lock(s->mutex);
  s->status = SessionStatus::Computing;
  if (!wait) {
    persist(*s);
    lock.unlock();
    launch(s, [this, s, config]() {
      std::lock_guard guard(s->mutex);
      try {
        s->campaign.emplace(config);
        s->status = s->campaign->finished() ? SessionStatus::Finished : SessionStatus::AwaitingResponse;
      } catch (const std::exception& e) {
        s->error = e.what();
        s->status = SessionStatus::Abandoned;
        spdlog::error("session {}: first action failed: {}", s->id, e.what());
      }
      persist(*s);
    });
    return {202, summary(*s)};
  }
  try {
    s->campaign.emplace(config);
  } catch (const ValidationError& e) {
    std::lock_guard g(mutex_);
    sessions_.erase(s->id);
    return error_reply(400, "invalid_config", e.what(), "config." + e.field());
  }
  s->status = s->campaign->finished() ? SessionStatus::Finished : SessionStatus::AwaitingResponse;
  persist(*s);
  return {201, summary(*s)};
}

ServiceReply SessionService::get(const std::string& id) {
  const auto s = find(id);
  if (!s) return error_reply(404, "not_found", "unknown session '" + id + "'");
  return {200, s->view()->at("summary")};
}

ServiceReply SessionService::state(const std::string& id) {
  const auto s = find(id);
  if (!s) return error_reply(404, "not_found", "unknown session '" + id + "'");
  return {200, s->view()->at("state")};
}

ServiceReply SessionService::export_session(const std::string& id) {
  const auto s = find(id);
  if (!s) return error_reply(404, "not_found", "unknown session '" + id + "'");
  return {200, s->view()->at("export")};
}

ServiceReply SessionService::abandon(const std::string& id) {
  const auto s = find(id);
  if (!s) return error_reply(404, "not_found", "unknown session '" + id + "'");
  std::lock_guard lock(s->mutex);
  if (s->status == SessionStatus::Computing) {
    return error_reply(409, "busy", "the session is computing; retry when it awaits a response");
  }
  if (s->status == SessionStatus::AwaitingResponse) {
    s->status = SessionStatus::Abandoned;
    persist(*s);
  }
  return {200, summary(*s)};
}

ServiceReply SessionService::respond(const std::string& id, const json& body) {
  const auto s = find(id);
  if (!s) return error_reply(404, "not_found", "unknown session '" + id + "'");
  if (!body.is_object()) return error_reply(400, "invalid_request", "body must be a JSON object");
  for (const auto& [key, value] : body.items()) {
    if (key != "iteration" && key != "d" && key != "y" && key != "wait") {
      return error_reply(400, "invalid_request", "unknown key", key);
    }
  }
  if (!body.contains("iteration") || !body["iteration"].is_number_integer()) {
    return error_reply(400, "invalid_request", "iteration (the echoed query iteration) is required", "iteration");
  }
  if (body.contains("d") == body.contains("y")) {
    return error_reply(400, "invalid_request", "exactly one of d or y is required", body.contains("d") ? "y" : "d");
  }
  const int iteration = body["iteration"].get<int>();
  const json payload = response_payload(body);
  const bool wait = body.value("wait", true);

  std::unique_lock lock(s->mutex);
  if (iteration >= 0 && iteration < static_cast<int>(s->transcript.size())) {
    const json& past = s->transcript[iteration];
    if (past.at("response") == payload) return {200, past.at("reply")};
    return error_reply(409, "conflict", "iteration " + std::to_string(iteration) +
                                            " was already answered with a different response",
                       "iteration");
  }
  if (s->status == SessionStatus::Computing) {
    if (!s->in_flight.is_null() && s->in_flight.at("iteration") == iteration &&
        s->in_flight.at("response") == payload) {
      return {202, summary(*s)};
    }
    return error_reply(409, "busy", "the session is computing its next query");
  }
  if (s->status == SessionStatus::Finished || s->status == SessionStatus::Abandoned) {
    return error_reply(409, "session_closed",
                       "the session is " + std::string(session_status_name(s->status)) + "; no query is pending");
  }
  const PendingAction& pending = *s->campaign->pending();
  if (iteration != pending.iter) {
    return error_reply(409, "stale_iteration",
                       "iteration " + std::to_string(iteration) + " does not match the pending query " +
                           std::to_string(pending.iter),
                       "iteration");
  }
  Outcome outcome;
  if (pending.action.type == Source::Compare) {
    if (!payload.contains("d")) {
      return error_reply(409, "type_mismatch", "the pending query is a comparison; answer with d", "y");
    }
    const json& d = payload["d"];
    if (!d.is_number_integer() || (d.get<int>() != 0 && d.get<int>() != 1)) {
      return error_reply(400, "invalid_request", "d must be 0 or 1", "d");
    }
    outcome.d = d.get<int>();
  } else {
    if (!payload.contains("y")) {
      return error_reply(409, "type_mismatch", "the pending query is an evaluation; answer with y", "d");
    }
    const json& y = payload["y"];
    if (!y.is_array() || static_cast<int>(y.size()) != s->campaign->config().outputs ||
        !std::all_of(y.begin(), y.end(), [](const json& v) { return v.is_number(); })) {
      return error_reply(400, "invalid_request",
                         "y must be an array of " + std::to_string(s->campaign->config().outputs) + " numbers", "y");
    }
    outcome.y = vector_from_json(y, "y");
    if (!outcome.y.allFinite()) return error_reply(400, "invalid_request", "y must be finite", "y");
  }

  const json action = query_message(s->id, *s->campaign);
  s->status = SessionStatus::Computing;
  s->in_flight = {{"iteration", iteration}, {"response", payload}};
  persist(*s);

  auto work = [this, s, outcome, action, payload, iteration]() {
    try {
      s->campaign->submit(outcome);
      s->status = s->campaign->finished() ? SessionStatus::Finished : SessionStatus::AwaitingResponse;
    } catch (const std::exception& e) {
      s->error = e.what();
      s->status = SessionStatus::Abandoned;
      spdlog::error("session {}: update failed: {}", s->id, e.what());
    }
    s->in_flight = nullptr;
    s->transcript.push_back({{"iteration", iteration}, {"action", action}, {"response", payload}, {"reply", summary(*s)}});
    persist(*s);
  };
  if (!wait) {
    lock.unlock();
    launch(s, [s, work]() {
      std::lock_guard guard(s->mutex);
      work();
    });
    return {202, summary(*s)};
  }
  work();
  return {200, s->transcript.back().at("reply")};
}

// ---- HTTP transport ----

namespace {
std::atomic<httplib::Server*> g_server{nullptr};

void send(httplib::Response& res, const ServiceReply& reply) {
  res.status = reply.status;
  res.set_content(reply.body.dump(), "application/json");
}

bool parse_body(const httplib::Request& req, httplib::Response& res, json& out) {
  try {
    out = req.body.empty() ? json::object() : json::parse(req.body);
    return true;
  } catch (const json::exception& e) {
    send(res, error_reply(400, "invalid_json", e.what()));
    return false;
  }
}
}  // namespace

void run_server(SessionService& service, const std::string& host, int port,
                const std::function<void(int)>& on_listening) {
  httplib::Server server;
  auto guarded = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const std::exception& e) {
        spdlog::error("request {} {} failed: {}", req.method, req.path, e.what());
        send(res, error_reply(500, "internal", e.what()));
      }
    };
  };
  server.Post("/v1/sessions", guarded([&](const httplib::Request& req, httplib::Response& res) {
                json body;
                if (parse_body(req, res, body)) send(res, service.create(body));
              }));
  server.Get(R"(/v1/sessions/([^/]+))", guarded([&](const httplib::Request& req, httplib::Response& res) {
               send(res, service.get(req.matches[1]));
             }));
  server.Post(R"(/v1/sessions/([^/]+)/response)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                json body;
                if (parse_body(req, res, body)) send(res, service.respond(req.matches[1], body));
              }));
  server.Post(R"(/v1/sessions/([^/]+)/abandon)", guarded([&](const httplib::Request& req, httplib::Response& res) {
                send(res, service.abandon(req.matches[1]));
              }));
  server.Get(R"(/v1/sessions/([^/]+)/state)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               send(res, service.state(req.matches[1]));
             }));
  server.Get(R"(/v1/sessions/([^/]+)/export)", guarded([&](const httplib::Request& req, httplib::Response& res) {
               send(res, service.export_session(req.matches[1]));
             }));
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    const std::string code = res.status == 404 ? "not_found" : "http_error";
    send(res, error_reply(res.status, code, req.method + " " + req.path + " is not a known route"));
  });
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot listen on " + host + ":" + std::to_string(port));
  g_server = &server;
  spdlog::info("listening on {}:{}", host, bound);
  if (on_listening) on_listening(bound);
  const bool ok = server.listen_after_bind();
  g_server = nullptr;
  service.wait_idle();
  if (!ok) throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

void stop_server() {
  if (httplib::Server* s = g_server.load()) {
    s->wait_until_ready();
    s->stop();
  }
}

}  // namespace eabo
