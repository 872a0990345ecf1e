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

#include "eabo/log.hpp"

#include <cstdlib>
#include <string>

namespace eabo {

void init_logging_from_env() {
  spdlog::set_level(spdlog::level::warn);
  const char* env = std::getenv("EABO_LOG");
  if (env == nullptr) return;
  const auto level = spdlog::level::from_str(env);
  // from_str maps unknown names to `off`; only honour an explicit "off".
  if (level != spdlog::level::off || std::string(env) == "off") spdlog::set_level(level);
}

}  // namespace eabo
