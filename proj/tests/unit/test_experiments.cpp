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

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include <unistd.h>

#include "eabo/errors.hpp"
#include "eabo/experiments.hpp"

using namespace eabo;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("eabo_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

TrajectoryStep point(double cum, std::optional<double> u, Source type = Source::Evaluate, double cost = 1.0) {
  TrajectoryStep s;
  s.cum_spend = cum;
  s.norm_utility = u;
  s.action.type = type;
  s.action.cost = cost;
  return s;
}

json small_base() {
  return {{"benchmark", "branin"},
          {"costs", {{"budget", 7}}},
          {"surrogate", {{"cold_steps", 100}, {"warm_steps", 40}}},
          {"acquisition", {{"restarts", 2}, {"steps", 20}, {"utility_candidates", 64}, {"utility_steps", 10}}}};
}

}  // namespace

TEST_CASE("sweep specs expand to the cross product") {
  const json doc{{"base", small_base()},
                 {"seeds", {{"start", 10}, {"count", 3}}},
                 {"policies", {"ea-bo", "kg-eval"}},
                 {"cost_ratios", {0.5, 5}},
                 {"noise_levels", {0.05}}};
  const SweepSpec spec = sweep_spec_from_json(doc);
  const std::vector<RunConfig> runs = spec.expand();
  REQUIRE(runs.size() == 12);
  std::set<std::string> stems;
  for (const RunConfig& c : runs) {
    stems.insert(sweep_run_stem(c));
    CHECK(c.costs.c_eval == 5.0);
    CHECK((c.costs.c_comp == 10.0 || c.costs.c_comp == 1.0));
    CHECK(c.noise.sigma_eval == 0.05);
    CHECK(c.noise.sigma_comp == 0.05);
    CHECK(c.seed >= 10);
    CHECK(c.seed <= 12);
  }
  CHECK(stems.size() == 12);
  CHECK(sweep_run_stem(runs.front()) == "branin_ea-bo_r0.5_n0.05_s10");

  json big = doc;
  big["seeds"] = {{"count", 1001}};
  auto field_of = [](const json& d) {
    try {
      sweep_spec_from_json(d);
    } catch (const ValidationError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of(big) == "cap");
  json bad = doc;
  bad["base"]["costs"]["c_eval"] = -1;
  CHECK(field_of(bad) == "base.costs.c_eval");
  bad = doc;
  bad["policies"] = {"bogus"};
  CHECK(field_of(bad) == "policies");
  bad = doc;
  bad["extra"] = 1;
  CHECK(field_of(bad) == "extra");
}

TEST_CASE("best-so-far curves and their mean band") {
  const std::vector<TrajectoryStep> a{point(1, 0.2), point(2, 0.1), point(4, 0.6)};
  const std::vector<std::optional<double>> c = best_so_far(a, 6);
  CHECK(!c[0].has_value());
  CHECK(*c[1] == 0.2);
  CHECK(*c[2] == 0.2);
  CHECK(*c[3] == 0.2);
  CHECK(*c[4] == 0.6);
  CHECK(*c[6] == 0.6);

  const std::vector<TrajectoryStep> b{point(2, 0.4), point(3, 0.8)};
  const std::vector<CurvePoint> curve = mean_curve({a, b});
  REQUIRE(curve.size() == 3);  // budgets 2, 3, 4 are covered by both runs
  CHECK(curve[0].budget == 2.0);
  CHECK(curve[0].mean == doctest::Approx(0.3));
  // sd of {0.2, 0.4} is sqrt(0.02); se = sd / sqrt(2) = 0.1.
  CHECK(curve[0].hi - curve[0].mean == doctest::Approx(0.196));
  CHECK(curve[2].mean == doctest::Approx(0.7));
  CHECK(curve[2].count == 2);
  CHECK_THROWS_AS(mean_curve({}), EmptyResults);
}

TEST_CASE("sweep writes runs and an aggregate, and refuses to overwrite") {
  const fs::path out = scratch("sweep");
  const json doc{{"base", small_base()}, {"seeds", {1, 2}}, {"policies", {"rand-eval", "rand-comp"}}};
  const SweepSpec spec = sweep_spec_from_json(doc);
  const SweepOutcome r = run_sweep(spec, out, 2, false);
  CHECK(r.runs == 4);
  CHECK(r.failed == 0);
  CHECK(fs::exists(out / "aggregate.csv"));
  CHECK(fs::exists(out / "runs" / "branin_rand-comp_r5_n0.1_s2.csv"));
  CHECK(fs::exists(out / "runs" / "branin_rand-comp_r5_n0.1_s2.json"));
  CHECK_THROWS_AS(run_sweep(spec, out, 1, false), ValidationError);

  const std::vector<AggregateRow> rows = aggregate_runs(out / "runs");
  REQUIRE(rows.size() == 2);
  for (const AggregateRow& row : rows) {
    CHECK(row.count == 2);
    CHECK(row.comp_fraction_mean == (row.policy == "rand-comp" ? 1.0 : 0.0));
    // Recompute the utility statistics from the run files.
    std::vector<double> finals;
    for (int seed : {1, 2}) {
      std::ifstream in(out / "runs" / ("branin_" + row.policy + "_r5_n0.1_s" + std::to_string(seed) + ".csv"));
      finals.push_back(*trajectory_from_csv(in).back().norm_utility);
    }
    const double mean = 0.5 * (finals[0] + finals[1]);
    CHECK(row.utility_mean == doctest::Approx(mean).epsilon(1e-14));
    CHECK(row.utility_std == doctest::Approx(std::abs(finals[0] - finals[1]) / std::sqrt(2.0)).epsilon(1e-12));
  }
  std::ifstream agg(out / "aggregate.csv");
  const std::string text((std::istreambuf_iterator<char>(agg)), std::istreambuf_iterator<char>());
  CHECK(text == aggregate_to_csv(rows));
  CHECK(text.rfind("policy,cost_ratio,noise,count,norm_utility_mean,norm_utility_std", 0) == 0);

  // Forced rerun reproduces the same files.
  const SweepOutcome again = run_sweep(spec, out, 1, true);
  CHECK(again.runs == 4);
  std::ifstream agg2(out / "aggregate.csv");
  const std::string text2((std::istreambuf_iterator<char>(agg2)), std::istreambuf_iterator<char>());
  CHECK(text2 == text);

  const fs::path report = scratch("report");
  const std::vector<fs::path> curves = write_report(out, report);
  CHECK(curves.size() == 2);
  CHECK(fs::exists(report / "curve_rand-eval.csv"));
  fs::remove_all(out);
  fs::remove_all(report);
}
