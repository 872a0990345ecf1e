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

#include <Eigen/Dense>
#include <random>

#include "eabo/numerics/sobol.hpp"
#include "eabo/surrogate.hpp"

namespace eabo::testing {

inline Eigen::VectorXd uniform_point(std::mt19937_64& rng, int dim) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd x(dim);
  for (int p = 0; p < dim; ++p) x(p) = u(rng);
  return x;
}

/// A random valid state with a perturbed q(u) and hyperparameters.
inline VariationalState random_state(std::mt19937_64& rng, int inducing, int dim, int outputs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  KernelHyperparams kernel = KernelHyperparams::constant(outputs, dim, 0.4, 1.0);
  for (int j = 0; j < outputs; ++j) {
    for (int p = 0; p < dim; ++p) kernel.log_lengthscales(j, p) = std::log(0.2 + 0.5 * u(rng));
    kernel.log_outputscales(j) = std::log(0.5 + u(rng));
  }
  // Space-filling inducing points, as the fitter uses.
  const Eigen::MatrixXd z = numerics::sobol_points(inducing, dim, rng());
  Eigen::VectorXd noise(outputs);
  for (int j = 0; j < outputs; ++j) noise(j) = 0.1 + 0.4 * u(rng);
  VariationalState s = VariationalState::prior(kernel, z, noise, 0.1 + 0.4 * u(rng));
  // Perturb q(u) in whitened coordinates so K_ZZ^-1 S_u stays well scaled.
  for (int j = 0; j < outputs; ++j) {
    const Eigen::MatrixXd lk = s.l_u[j];
    Eigen::VectorXd w(inducing);
    for (int i = 0; i < inducing; ++i) w(i) = n(rng);
    Eigen::MatrixXd t = Eigen::MatrixXd::Identity(inducing, inducing);
    for (int r = 0; r < inducing; ++r) {
      for (int c = 0; c < r; ++c) t(r, c) = 0.2 * n(rng);
      t(r, r) = 0.5 * std::exp(0.2 * n(rng));
    }
    s.m_u[j] = lk * w;
    s.l_u[j] = lk * t;
  }
  return s;
}

inline MixedDataset random_dataset(std::mt19937_64& rng, int n_eval, int n_comp, int dim, int outputs) {
  std::normal_distribution<double> n(0.0, 1.0);
  MixedDataset data;
  for (int i = 0; i < n_eval; ++i) {
    Eigen::VectorXd y(outputs);
    for (int j = 0; j < outputs; ++j) y(j) = n(rng);
    data.evals.push_back({uniform_point(rng, dim), y});
  }
  for (int c = 0; c < n_comp; ++c) {
    data.comps.push_back({uniform_point(rng, dim), uniform_point(rng, dim), static_cast<int>(rng() % 2)});
  }
  return data;
}

}  // namespace eabo::testing
