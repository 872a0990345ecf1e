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

#include <json.hpp>

#include "eabo/surrogate.hpp"

namespace eabo {

inline constexpr int kStateSchemaVersion = 1;

/// Versioned JSON document of a VariationalState. Doubles are written with
/// round-trip precision.
nlohmann::json state_to_json(const VariationalState& state);
/// Inverse of state_to_json; throws ValidationError naming the bad field.
VariationalState state_from_json(const nlohmann::json& doc);

nlohmann::json vector_to_json(const Eigen::VectorXd& v);
Eigen::VectorXd vector_from_json(const nlohmann::json& doc, const std::string& field);

/// True for integers >= 0, whether stored signed or unsigned.
inline bool is_nonnegative_integer(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

}  // namespace eabo
