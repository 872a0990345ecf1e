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

#include <condition_variable>
#include <functional>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <json.hpp>

#include "eabo/driver.hpp"

namespace eabo {

inline constexpr int kSessionSchemaVersion = 1;
inline constexpr int kSliceGridPoints = 21;

enum class SessionStatus { AwaitingResponse, Computing, Finished, Abandoned };
std::string_view session_status_name(SessionStatus status);

/// An HTTP-shaped reply: status code plus JSON body.
struct ServiceReply {
  int status = 200;
  nlohmann::json body;
};

/// Session logic of the elicitation service, independent of the transport.
/// Every transition is persisted as <data_dir>/<id>.json (write to a
/// temporary file, then rename) before the reply is returned, and sessions
/// are reloaded from disk on first access after a restart. Requests on one
/// session are serialized; reads return the last persisted snapshot.
class SessionService {
 public:
  explicit SessionService(std::filesystem::path data_dir);
  ~SessionService();
  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  /// Body: {"config": {...}, "wait": true}. With "wait": false the first
  /// action is computed in the background and 202 is returned.
  ServiceReply create(const nlohmann::json& body);
  ServiceReply get(const std::string& id);
  /// Body: {"iteration": n, "d": 0|1} or {"iteration": n, "y": [...]}.
  ServiceReply respond(const std::string& id, const nlohmann::json& body);
  ServiceReply state(const std::string& id);
  ServiceReply export_session(const std::string& id);
  ServiceReply abandon(const std::string& id);

  /// Blocks until no background computation is running.
  void wait_idle();

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id);
  void persist(const Session& s) const;
  void launch(std::shared_ptr<Session> s, std::function<void()> work);
  nlohmann::json summary(const Session& s) const;
  nlohmann::json snapshot(const Session& s) const;

  std::filesystem::path dir_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::mutex tasks_mutex_;
  std::condition_variable tasks_cv_;
  int running_tasks_ = 0;
};

/// The pending action as a query message.
nlohmann::json query_message(const std::string& session_id, const Campaign& campaign);

/// Posterior mean/sd display data: a 21-per-axis grid for d <= 2, and
/// coordinate-wise profiles through the recommendation for d > 2.
nlohmann::json posterior_slice(const Campaign& campaign);

/// Serves the session API on host:port until stop_server() is called. Port 0
/// picks a free port; `on_listening` receives the bound port once accepting.
void run_server(SessionService& service, const std::string& host, int port,
                const std::function<void(int)>& on_listening = {});
void stop_server();

}  // namespace eabo
