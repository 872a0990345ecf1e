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
#include <cstdint>
#include <algorithm>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "eabo/fantasy.hpp"
#include "eabo/surrogate.hpp"
#include "eabo/utility.hpp"

namespace eabo {

struct CostModel {
  double c_eval = 5.0;
  double c_comp = 1.0;
  double budget = 150.0;

  void validate() const;
  double cheapest() const { return std::min(c_eval, c_comp); }
};

enum class Source { Evaluate, Compare };

std::string_view source_name(Source source);

struct Action {
  Source type = Source::Evaluate;
  Eigen::VectorXd x;  ///< the evaluation point, or x_a of a comparison
  Eigen::VectorXd x_b;
  double cost = 0.0;

  static Action evaluate(Eigen::VectorXd x, double cost) { return {Source::Evaluate, std::move(x), {}, cost}; }
  static Action compare(Eigen::VectorXd x_a, Eigen::VectorXd x_b, double cost) {
    return {Source::Compare, std::move(x_a), std::move(x_b), cost};
  }
};

struct AcquisitionConfig {
  int restarts = 16;
  int steps = 150;
  double learning_rate = 0.05;
  double clip_norm = 10.0;
  int fantasy_points = 8;  ///< K
  int mc_draws = 16;
  double epsilon = 1e-9;
  double inner_jitter = 0.1;  ///< half-width of the Sobol jitter around the incumbent
  int utility_candidates = 512;
  int utility_starts = 4;
  int utility_steps = 100;
  double utility_learning_rate = 0.02;

  void validate() const;
};

struct DatasetUtility {
  double value = 0.0;
  Eigen::VectorXd argmax;
};

/// E[U(f(x))] under the posterior and its gradient in x.
double expected_utility_at(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                           const Eigen::VectorXd& x, Eigen::VectorXd* gradient = nullptr);

/// u(D) = max_x E[U(f(x)) | D] by scoring Sobol candidates (plus `extra`
/// points), then running Adam from the best few.
DatasetUtility dataset_utility(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                               const AcquisitionConfig& config, std::uint64_t seed,
                               const std::vector<Eigen::VectorXd>& extra = {});

/// One-shot evaluation objective (1/S) sum_s max_k E_{D'_s}[U(f(x'_k))]
/// with D'_s the dataset after the pathwise draw s at x. `inner` holds one
/// fantasy point per row. Gradients are written when the pointers are set.
double eval_one_shot(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                     const MatheronDraws& draws, const Eigen::VectorXd& x, const Eigen::MatrixXd& inner,
                     Eigen::VectorXd* grad_x = nullptr, Eigen::MatrixXd* grad_inner = nullptr);

/// One-shot comparison objective sum_d P(d) max_k E_{D'_d}[U(f(x'_k))].
double comp_one_shot(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                     const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b, const Eigen::MatrixXd& inner,
                     Eigen::VectorXd* grad_a = nullptr, Eigen::VectorXd* grad_b = nullptr,
                     Eigen::MatrixXd* grad_inner = nullptr);

struct AcquisitionResult {
  Action action;
  double voi = 0.0;      ///< floored at zero
  double voi_raw = 0.0;  ///< best one-shot objective minus u(D)
  double voi_per_cost = 0.0;
  Eigen::MatrixXd fantasy_points;      ///< K x d
  std::vector<double> restart_values;  ///< best objective of every restart
};

AcquisitionResult voi_eval(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                           const CostModel& costs, const AcquisitionConfig& config, const DatasetUtility& current,
                           std::uint64_t seed);

AcquisitionResult voi_comp(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                           const CostModel& costs, const AcquisitionConfig& config, const DatasetUtility& current,
                           std::uint64_t seed);

struct SourceSet {
  bool evaluate = true;
  bool compare = true;
};

struct Selection {
  Action action;
  std::optional<AcquisitionResult> eval;  ///< absent when the source was disabled or unaffordable
  std::optional<AcquisitionResult> comp;
  bool degenerate = false;  ///< both VoIs fell below epsilon
};

/// Picks the affordable action with the largest VoI per unit cost.
/// Near-ties (relative 1e-12) go to Evaluate; when every VoI is below
/// epsilon a uniform random action of the cheaper source is returned.
/// Throws BudgetExhausted when nothing is affordable.
Selection select_action(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                        const CostModel& costs, double remaining, const AcquisitionConfig& config,
                        const DatasetUtility& current, SourceSet sources, std::uint64_t seed);

/// The decision rule of select_action on precomputed VoIs. Returns nullopt
/// when both are below epsilon.
std::optional<Source> choose_source(std::optional<double> voi_eval, std::optional<double> voi_comp,
                                    const CostModel& costs, double epsilon);

}  // namespace eabo
