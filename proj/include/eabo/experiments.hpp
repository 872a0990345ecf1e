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

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "eabo/driver.hpp"

namespace eabo {

inline constexpr int kDefaultSweepCap = 2000;

/// A grid of runs: the cross product of seeds, policies, cost ratios
/// (c_eval / c_comp with c_eval held fixed) and noise levels (applied to
/// both sigma_eval and sigma_comp). Empty lists keep the base value.
struct SweepSpec {
  RunConfig base;
  std::vector<std::uint64_t> seeds;
  std::vector<Policy> policies;
  std::vector<double> cost_ratios;
  std::vector<double> noise_levels;
  int cap = kDefaultSweepCap;

  std::vector<RunConfig> expand() const;
};

/// Throws ValidationError (with the offending field) on a bad spec or when
/// the grid exceeds the cap.
SweepSpec sweep_spec_from_json(const nlohmann::json& doc);

/// File stem of one run inside a sweep directory, unique per grid cell and seed.
std::string sweep_run_stem(const RunConfig& config);

struct SweepOutcome {
  int runs = 0;
  int failed = 0;
};

/// Runs every configuration with `parallel` workers, writing
/// <out>/runs/<stem>.{csv,json}, <out>/failures.txt and <out>/aggregate.csv.
/// Refuses a non-empty `out` unless `force`.
SweepOutcome run_sweep(const SweepSpec& spec, const std::filesystem::path& out, int parallel, bool force);

struct AggregateRow {
  std::string policy;
  double cost_ratio = 0.0;
  double noise = 0.0;
  int count = 0;
  double utility_mean = 0.0, utility_std = 0.0;
  double comp_fraction_mean = 0.0, comp_fraction_std = 0.0;
  double early_mean = 0.0, early_std = 0.0;
  double late_mean = 0.0, late_std = 0.0;
};

/// Groups the runs in `runs_dir` (trajectory CSVs with their sidecars) by
/// policy, cost ratio and noise, computing statistics from the CSV rows.
std::vector<AggregateRow> aggregate_runs(const std::filesystem::path& runs_dir);
std::string aggregate_to_csv(const std::vector<AggregateRow>& rows);

struct CurvePoint {
  double budget = 0.0;
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;
};

/// Best-so-far normalized utility of one trajectory on an integer budget
/// grid: the running maximum over steps with cum_spend <= b, held after the
/// last step. Grid points before the first step are absent (nullopt).
std::vector<std::optional<double>> best_so_far(const std::vector<TrajectoryStep>& steps, int grid_end);

/// Mean best-so-far curve with a mean +- 1.96 se band, over the grid
/// points every trajectory covers. Throws EmptyResults.
std::vector<CurvePoint> mean_curve(const std::vector<std::vector<TrajectoryStep>>& runs);

/// Writes <out>/curve_<policy>.csv for every policy found under
/// `results_dir` (searched recursively). Returns the files written.
std::vector<std::filesystem::path> write_report(const std::filesystem::path& results_dir,
                                                const std::filesystem::path& out);

}  // namespace eabo
