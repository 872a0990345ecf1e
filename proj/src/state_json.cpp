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

#include "eabo/state_json.hpp"

#include <string>

#include "eabo/errors.hpp"

namespace eabo {
namespace {

const nlohmann::json& require(const nlohmann::json& doc, const std::string& field) {
  if (!doc.is_object() || !doc.contains(field)) throw ValidationError(field, "missing");
  return doc.at(field);
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& doc, const std::string& field, Eigen::Index cols) {
  if (!doc.is_array()) throw ValidationError(field, "expected an array of rows");
  Eigen::MatrixXd out(static_cast<Eigen::Index>(doc.size()), cols);
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const Eigen::VectorXd row = vector_from_json(doc[i], field);
    if (row.size() != cols) throw ValidationError(field, "ragged rows");
    out.row(static_cast<Eigen::Index>(i)) = row.transpose();
  }
  return out;
}

}  // namespace

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& doc, const std::string& field) {
  if (!doc.is_array()) throw ValidationError(field, "expected an array of numbers");
  Eigen::VectorXd out(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number()) throw ValidationError(field, "expected numbers");
    out(static_cast<Eigen::Index>(i)) = doc[i].get<double>();
  }
  return out;
}

nlohmann::json state_to_json(const VariationalState& state) {
  nlohmann::json doc;
  doc["schema_version"] = kStateSchemaVersion;
  nlohmann::json z = nlohmann::json::array();
  for (int i = 0; i < state.inducing(); ++i) z.push_back(vector_to_json(state.z.row(i).transpose()));
  doc["z"] = z;
  nlohmann::json m_u = nlohmann::json::array();
  nlohmann::json l_u = nlohmann::json::array();
  for (int j = 0; j < state.outputs(); ++j) {
    m_u.push_back(vector_to_json(state.m_u[j]));
    nlohmann::json packed = nlohmann::json::array();
    for (int r = 0; r < state.inducing(); ++r) {
      for (int c = 0; c <= r; ++c) packed.push_back(state.l_u[j](r, c));
    }
    l_u.push_back(packed);
  }
  doc["m_u"] = m_u;
  doc["l_u_packed"] = l_u;
  nlohmann::json ls = nlohmann::json::array();
  for (int j = 0; j < state.outputs(); ++j) ls.push_back(vector_to_json(state.kernel.log_lengthscales.row(j).transpose()));
  doc["log_lengthscales"] = ls;
  doc["log_outputscales"] = vector_to_json(state.kernel.log_outputscales);
  doc["log_noise_eval"] = vector_to_json(state.log_noise_eval);
  doc["log_noise_comp"] = state.log_noise_comp;
  return doc;
}

VariationalState state_from_json(const nlohmann::json& doc) {
  const auto& version = require(doc, "schema_version");
  if (!version.is_number_integer() || version.get<int>() != kStateSchemaVersion) {
    throw ValidationError("schema_version", "unsupported state schema version");
  }
  VariationalState s;
  const auto& z = require(doc, "z");
  if (!z.is_array() || z.empty()) throw ValidationError("z", "expected a nonempty array of rows");
  const Eigen::Index dim = static_cast<Eigen::Index>(z[0].size());
  s.z = matrix_from_json(z, "z", dim);
  const Eigen::Index M = s.z.rows();
  s.kernel.log_outputscales = vector_from_json(require(doc, "log_outputscales"), "log_outputscales");
  s.kernel.log_lengthscales = matrix_from_json(require(doc, "log_lengthscales"), "log_lengthscales", dim);
  s.log_noise_eval = vector_from_json(require(doc, "log_noise_eval"), "log_noise_eval");
  const auto& lnc = require(doc, "log_noise_comp");
  if (!lnc.is_number()) throw ValidationError("log_noise_comp", "expected a number");
  s.log_noise_comp = lnc.get<double>();
  const auto& m_u = require(doc, "m_u");
  const auto& l_u = require(doc, "l_u_packed");
  if (!m_u.is_array() || !l_u.is_array() || m_u.size() != l_u.size()) {
    throw ValidationError("m_u", "per-output arrays of m_u and l_u_packed must have equal length");
  }
  for (std::size_t j = 0; j < m_u.size(); ++j) {
    s.m_u.push_back(vector_from_json(m_u[j], "m_u"));
    const Eigen::VectorXd packed = vector_from_json(l_u[j], "l_u_packed");
    if (packed.size() != M * (M + 1) / 2) throw ValidationError("l_u_packed", "wrong packed length");
    Eigen::MatrixXd l = Eigen::MatrixXd::Zero(M, M);
    Eigen::Index idx = 0;
    for (Eigen::Index r = 0; r < M; ++r) {
      for (Eigen::Index c = 0; c <= r; ++c) l(r, c) = packed(idx++);
    }
    s.l_u.push_back(l);
  }
  try {
    s.validate();
  } catch (const ValidationError&) {
    throw;
  } catch (const Error& e) {
    throw ValidationError("state", e.what());
  }
  return s;
}

}  // namespace eabo
