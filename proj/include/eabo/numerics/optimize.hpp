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
#include <functional>
#include <optional>

namespace eabo::numerics {

/// Objective returning f(x) and writing df/dx into `gradient` (pre-sized to x).
using ObjectiveWithGradient = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& gradient)>;

struct OptimizerConfig {
  double learning_rate = 0.01;
  int steps = 100;
  std::optional<double> clip_norm;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Coordinate-wise box; infinite bounds leave a coordinate free.
struct Box {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  static Box unit(Eigen::Index dim) {
    return {Eigen::VectorXd::Zero(dim), Eigen::VectorXd::Ones(dim)};
  }
  Eigen::VectorXd project(const Eigen::VectorXd& x) const { return x.cwiseMax(lower).cwiseMin(upper); }
};

/// Adam moment state for callers that drive their own loop. `step` clips,
/// applies one update in place, and does not project.
class AdamState {
 public:
  AdamState(Eigen::Index size, const OptimizerConfig& config);
  void step(Eigen::VectorXd& x, Eigen::VectorXd gradient);

 private:
  OptimizerConfig config_;
  Eigen::VectorXd first_;
  Eigen::VectorXd second_;
  double beta1_power_ = 1.0;
  double beta2_power_ = 1.0;
};

struct MinimizeResult {
  Eigen::VectorXd point;
  double value = 0.0;
  int best_step = 0;  ///< 0 is the initial point
};

/// Adam with global-norm gradient clipping and optional box projection.
/// Performs exactly `config.steps` updates (clip, Adam rule, project) and
/// returns the best visited iterate, not the last one. Throws
/// NonFiniteObjective as soon as a visited point yields a NaN/inf value or
/// gradient.
MinimizeResult adam_minimize(const ObjectiveWithGradient& objective, const Eigen::VectorXd& initial,
                             const OptimizerConfig& config, const std::optional<Box>& projection = std::nullopt);

/// Central-difference gradient check. Returns
/// max_i |analytic_i - numeric_i| / max(1, |numeric_i|).
double finite_difference_check(const ObjectiveWithGradient& objective, const Eigen::VectorXd& point, double step);

}  // namespace eabo::numerics
