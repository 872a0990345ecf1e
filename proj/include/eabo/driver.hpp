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
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eabo/acquisition.hpp"
#include "eabo/benchmarks.hpp"
#include "eabo/surrogate.hpp"
#include "eabo/utility.hpp"

namespace eabo {

inline constexpr int kRunConfigSchemaVersion = 1;

enum class Policy { EaBo, KgEval, KgComp, RandEval, RandComp };

std::string_view policy_name(Policy policy);
/// Throws ValidationError("policy", ...) on an unknown name.
Policy parse_policy(std::string_view name);

struct UtilitySpec {
  Utility::Kind kind = Utility::Kind::Linear;
  std::optional<Eigen::VectorXd> weights;  ///< default: equal (linear) or unit (Chebyshev) weights

  Utility build(int outputs) const;
};

struct NoiseConfig {
  double sigma_eval = 0.1;
  double sigma_comp = 0.1;
  bool learn = true;  ///< false pins the model noises to these values
};

struct RunConfig {
  std::string benchmark;  ///< empty for live sessions without a simulated truth
  int dim = 0;
  int outputs = 0;
  UtilitySpec utility;
  CostModel costs;
  NoiseConfig noise;
  Policy policy = Policy::EaBo;
  FitConfig surrogate;
  AcquisitionConfig acquisition;
  std::uint64_t seed = 0;
  bool record_wall_time = false;

  /// Fills dim/outputs from the benchmark and checks every field.
  void validate(bool require_benchmark);
  Utility build_utility() const { return utility.build(outputs); }
  SourceSet sources() const;
};

/// Parses and validates a run config. Unknown keys are rejected.
RunConfig run_config_from_json(const nlohmann::json& doc, bool require_benchmark = true);
nlohmann::ordered_json run_config_to_json(const RunConfig& config);

/// A pending or answered action's outcome.
struct Outcome {
  Eigen::VectorXd y;  ///< evaluations
  int d = -1;         ///< comparisons
};

struct TrajectoryStep {
  int iter = 0;
  Action action;
  double cum_spend = 0.0;
  Outcome outcome;
  Eigen::VectorXd recommendation;
  std::optional<double> norm_utility;
  std::optional<double> voi_eval_raw;
  std::optional<double> voi_comp_raw;
  std::string chosen_source;  ///< evaluate, compare or random
  double wall_ms = 0.0;
  std::uint64_t warm_start_fingerprint = 0;  ///< of the state the refit after this step started from
  std::uint64_t state_fingerprint = 0;       ///< of the state that refit produced
};

struct AllocationSummary {
  double comparison_fraction = 0.0;
  double early_fraction = 0.0;  ///< first quarter of the spent budget
  double late_fraction = 0.0;   ///< last quarter
};

/// Budget-weighted comparison fractions; quartiles are cut on cumulative
/// spend, splitting an action that straddles a cut. Throws EmptyTrajectory.
AllocationSummary summarize_allocation(const std::vector<TrajectoryStep>& steps);

/// The pending action as presented to an answer source.
struct PendingAction {
  int iter = 0;
  Action action;
  std::optional<double> voi_eval_raw;
  std::optional<double> voi_comp_raw;
  std::string chosen_source;
};

/// Algorithm state shared by the batch driver and the live service. The
/// loop is driven by alternating `pending()` and `submit()`; everything
/// needed to continue is serializable with to_json/from_json.
class Campaign {
 public:
  /// Fits the prior model, recommends, and selects the first action.
  explicit Campaign(RunConfig config);

  const RunConfig& config() const { return config_; }
  const std::optional<PendingAction>& pending() const { return pending_; }
  bool finished() const { return !pending_.has_value(); }
  double spent() const { return spent_; }
  double remaining() const { return config_.costs.budget - spent_; }
  int iteration() const { return iteration_; }
  const MixedDataset& data() const { return data_; }
  const VariationalState& state() const { return state_; }
  const std::vector<TrajectoryStep>& trajectory() const { return steps_; }
  const Eigen::VectorXd& recommendation() const { return recommendation_; }
  double recommendation_value() const { return recommendation_value_; }
  std::optional<double> norm_utility() const;

  /// Records the answer to the pending action, refits, recommends and
  /// selects the next action (or finishes). Throws ValidationError when the
  /// outcome does not match the pending action.
  void submit(const Outcome& outcome);

  nlohmann::json to_json() const;
  static Campaign from_json(const nlohmann::json& doc);

 private:
  Campaign() = default;
  void refit_and_recommend();
  void select_next();
  std::uint64_t stream(std::string_view name, std::uint64_t counter = 0) const;

  RunConfig config_;
  Utility utility_ = Utility::default_linear(1);
  const Benchmark* benchmark_ = nullptr;
  MixedDataset data_;
  VariationalState state_;
  bool fitted_ = false;
  std::uint64_t last_fingerprint_ = 0;
  std::optional<double> optimum_value_;
  Eigen::VectorXd recommendation_;
  double recommendation_value_ = 0.0;
  double spent_ = 0.0;
  int iteration_ = 0;
  std::optional<PendingAction> pending_;
  std::vector<TrajectoryStep> steps_;
};

struct RunResult {
  std::vector<TrajectoryStep> steps;
  Eigen::VectorXd recommendation;
  std::optional<double> final_norm_utility;
  double spent = 0.0;
  bool complete = true;
  std::string error;  ///< set when incomplete
};

/// Runs the policy of `config` to budget exhaustion against `oracle`.
/// Oracle seeds are derived from the master seed and the iteration. An
/// OracleFailure ends the run early with `complete = false`.
RunResult run(const RunConfig& config, Oracle& oracle);
/// Runs against the simulated oracle of the configured benchmark.
RunResult run(const RunConfig& config);

/// Seed given to the oracle for iteration `iter`.
std::uint64_t oracle_seed(const RunConfig& config, int iter, Source source);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double v);

std::string trajectory_csv_header();
/// One CSV document with a header and one row per step. Numbers use the
/// shortest round-trip representation so reruns are byte-identical.
std::string trajectory_to_csv(const std::vector<TrajectoryStep>& steps);
std::vector<TrajectoryStep> trajectory_from_csv(std::istream& in);

/// JSON sidecar with the config and summary statistics.
nlohmann::ordered_json run_sidecar(const RunConfig& config, const RunResult& result);

/// Writes <stem>.csv and <stem>.json.
void write_run_files(const std::string& stem, const RunConfig& config, const RunResult& result);

}  // namespace eabo
