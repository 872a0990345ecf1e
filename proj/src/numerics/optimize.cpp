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

#include "eabo/numerics/optimize.hpp"

#include <algorithm>
#include <cmath>

#include "eabo/errors.hpp"

namespace eabo::numerics {
namespace {

double checked_eval(const ObjectiveWithGradient& objective, const Eigen::VectorXd& x, Eigen::VectorXd& gradient,
                    int step) {
  gradient.setZero(x.size());
  const double value = objective(x, gradient);
  if (!std::isfinite(value) || !gradient.allFinite()) {
    throw NonFiniteObjective("adam_minimize: non-finite objective or gradient at step " + std::to_string(step));
  }
  return value;
}

}  // namespace

AdamState::AdamState(Eigen::Index size, const OptimizerConfig& config)
    : config_(config), first_(Eigen::VectorXd::Zero(size)), second_(Eigen::VectorXd::Zero(size)) {}

void AdamState::step(Eigen::VectorXd& x, Eigen::VectorXd gradient) {
  if (config_.clip_norm) {
    const double norm = gradient.norm();
    if (norm > *config_.clip_norm) gradient *= *config_.clip_norm / norm;
  }
  first_ = config_.beta1 * first_ + (1.0 - config_.beta1) * gradient;
  second_ = config_.beta2 * second_ + (1.0 - config_.beta2) * gradient.cwiseProduct(gradient);
  beta1_power_ *= config_.beta1;
  beta2_power_ *= config_.beta2;
  const double lr_t = config_.learning_rate * std::sqrt(1.0 - beta2_power_) / (1.0 - beta1_power_);
  x.array() -= lr_t * first_.array() / (second_.array().sqrt() + config_.epsilon);
}

MinimizeResult adam_minimize(const ObjectiveWithGradient& objective, const Eigen::VectorXd& initial,
                             const OptimizerConfig& config, const std::optional<Box>& projection) {
  const Eigen::Index n = initial.size();
  Eigen::VectorXd x = projection ? projection->project(initial) : initial;
  Eigen::VectorXd gradient(n);
  AdamState adam(n, config);

  double value = checked_eval(objective, x, gradient, 0);
  MinimizeResult best{x, value, 0};
  for (int step = 1; step <= config.steps; ++step) {
    adam.step(x, gradient);
    if (projection) x = projection->project(x);
    value = checked_eval(objective, x, gradient, step);
    if (value < best.value) best = {x, value, step};
  }
  return best;
}

double finite_difference_check(const ObjectiveWithGradient& objective, const Eigen::VectorXd& point, double step) {
  Eigen::VectorXd analytic(point.size());
  analytic.setZero();
  objective(point, analytic);
  Eigen::VectorXd scratch(point.size());
  double worst = 0.0;
  for (Eigen::Index i = 0; i < point.size(); ++i) {
    Eigen::VectorXd plus = point;
    Eigen::VectorXd minus = point;
    plus(i) += step;
    minus(i) -= step;
    scratch.setZero();
    const double f_plus = objective(plus, scratch);
    scratch.setZero();
    const double f_minus = objective(minus, scratch);
    const double numeric = (f_plus - f_minus) / (2.0 * step);
    worst = std::max(worst, std::abs(analytic(i) - numeric) / std::max(1.0, std::abs(numeric)));
  }
  return worst;
}

}  // namespace eabo::numerics
