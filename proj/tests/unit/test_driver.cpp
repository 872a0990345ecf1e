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

#include <sstream>

#include "eabo/benchmarks.hpp"
#include "eabo/driver.hpp"
#include "eabo/errors.hpp"

using namespace eabo;
using nlohmann::json;

namespace {

RunConfig quick_config(Policy policy, double budget = 12.0, std::uint64_t seed = 3) {
  RunConfig c;
  c.benchmark = "branin";
  c.policy = policy;
  c.costs.budget = budget;
  c.seed = seed;
  c.surrogate.cold_steps = 150;
  c.surrogate.warm_steps = 60;
  c.acquisition.restarts = 4;
  c.acquisition.steps = 40;
  c.acquisition.utility_candidates = 128;
  c.acquisition.utility_steps = 30;
  c.validate(true);
  return c;
}

TrajectoryStep step_of(Source type, double cost, double cum) {
  TrajectoryStep s;
  s.action.type = type;
  s.action.cost = cost;
  s.cum_spend = cum;
  return s;
}

class FailingOracle : public Oracle {
 public:
  explicit FailingOracle(int fail_at) : fail_at_(fail_at) {}
  Eigen::VectorXd evaluate(const Eigen::VectorXd&, std::uint64_t) override {
    if (calls_++ == fail_at_) throw OracleFailure("instrument offline");
    return Eigen::VectorXd::Zero(1);
  }
  int compare(const Eigen::VectorXd&, const Eigen::VectorXd&, std::uint64_t) override {
    if (calls_++ == fail_at_) throw OracleFailure("expert unavailable");
    return 1;
  }

 private:
  int fail_at_;
  int calls_ = 0;
};

}  // namespace

TEST_CASE("allocation summary arithmetic") {
  // eval [0,5], comp [5,6], comp [6,7], eval [7,12]: comparisons are 2 of 12 units.
  const std::vector<TrajectoryStep> a{step_of(Source::Evaluate, 5, 5), step_of(Source::Compare, 1, 6),
                                      step_of(Source::Compare, 1, 7), step_of(Source::Evaluate, 5, 12)};
  const AllocationSummary s = summarize_allocation(a);
  CHECK(s.comparison_fraction == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  CHECK(s.early_fraction == 0.0);
  CHECK(s.late_fraction == 0.0);

  // comp [0,1], comp [1,2], eval [2,7], comp [7,8]: quarter = 2; early holds 2 units of comparisons,
  // late [6,8] holds 1.
  const std::vector<TrajectoryStep> b{step_of(Source::Compare, 1, 1), step_of(Source::Compare, 1, 2),
                                      step_of(Source::Evaluate, 5, 7), step_of(Source::Compare, 1, 8)};
  const AllocationSummary t = summarize_allocation(b);
  CHECK(t.comparison_fraction == doctest::Approx(3.0 / 8.0));
  CHECK(t.early_fraction == doctest::Approx(1.0));
  CHECK(t.late_fraction == doctest::Approx(0.5));
  CHECK_THROWS_AS(summarize_allocation({}), EmptyTrajectory);
}

TEST_CASE("run config parsing reports the offending field") {
  json ok{{"benchmark", "branin"}, {"costs", {{"budget", 20}}}};
  const RunConfig c = run_config_from_json(ok);
  CHECK(c.dim == 2);
  CHECK(c.outputs == 1);
  CHECK(c.costs.c_eval == 5.0);
  const RunConfig back = run_config_from_json(json(run_config_to_json(c)));
  CHECK(json(run_config_to_json(back)) == json(run_config_to_json(c)));

  auto field_of = [](const json& doc) {
    try {
      run_config_from_json(doc);
    } catch (const ValidationError& e) {
      return e.field();
    }
    return std::string("<none>");
  };
  CHECK(field_of({{"benchmark", "branin"}, {"bogus", 1}}) == "bogus");
  CHECK(field_of({{"benchmark", "branin"}, {"costs", {{"c_comp", -1}}}}) == "costs.c_comp");
  CHECK(field_of({{"benchmark", "branin"}, {"acquisition", {{"restarts", 0}}}}) == "acquisition.restarts");
  CHECK(field_of({{"benchmark", "nope"}}) == "benchmark");
  CHECK(field_of({{"benchmark", "branin"}, {"policy", "greedy"}}) == "policy");
  CHECK(field_of({{"benchmark", "hartmann6"}, {"utility", {{"kind", "chebyshev"}, {"weights", {1.0, 2.0}}}}}) ==
        "utility.weights");
}

TEST_CASE("runs are deterministic and the trajectory csv round-trips") {
  const RunConfig c = quick_config(Policy::EaBo);
  const RunResult a = run(c);
  const RunResult b = run(c);
  const std::string csv = trajectory_to_csv(a.steps);
  CHECK(csv == trajectory_to_csv(b.steps));
  std::istringstream in(csv);
  CHECK(trajectory_to_csv(trajectory_from_csv(in)) == csv);
  CHECK(csv.rfind(trajectory_csv_header(), 0) == 0);
  const RunResult other = run(quick_config(Policy::EaBo, 12.0, 4));
  CHECK(trajectory_to_csv(other.steps) != csv);
}

TEST_CASE("budget is conserved and warm starts chain") {
  for (Policy p : {Policy::EaBo, Policy::RandComp}) {
    const RunConfig c = quick_config(p, 13.0);
    const RunResult r = run(c);
    REQUIRE(!r.steps.empty());
    double spent = 0.0;
    for (std::size_t i = 0; i < r.steps.size(); ++i) {
      const TrajectoryStep& s = r.steps[i];
      CHECK(s.iter == static_cast<int>(i));
      spent += s.action.cost;
      CHECK(s.cum_spend == doctest::Approx(spent));
      if (i > 0) CHECK(s.warm_start_fingerprint == r.steps[i - 1].state_fingerprint);
    }
    CHECK(r.spent <= c.costs.budget);
    CHECK(c.costs.budget - r.spent < c.costs.cheapest());
  }
}

TEST_CASE("policies respect their source restrictions") {
  const RunResult eval = run(quick_config(Policy::KgEval, 15.0));
  for (const TrajectoryStep& s : eval.steps) CHECK(s.action.type == Source::Evaluate);
  CHECK(eval.steps.size() == 3);
  const RunResult comp = run(quick_config(Policy::KgComp, 4.0));
  for (const TrajectoryStep& s : comp.steps) CHECK(s.action.type == Source::Compare);
  const RunResult rand = run(quick_config(Policy::RandEval, 10.0));
  for (const TrajectoryStep& s : rand.steps) {
    CHECK(s.action.type == Source::Evaluate);
    CHECK(s.chosen_source == "random");
    CHECK(!s.voi_eval_raw.has_value());
  }
}

TEST_CASE("a campaign restored from json continues identically") {
  const RunConfig c = quick_config(Policy::EaBo, 9.0);
  const RunResult full = run(c);

  const Benchmark& bench = Benchmark::get("branin");
  SimulatedOracle oracle(bench, c.build_utility(), c.noise.sigma_eval, c.noise.sigma_comp);
  Campaign first(c);
  auto answer = [&](Campaign& camp) {
    const PendingAction& p = *camp.pending();
    Outcome o;
    if (p.action.type == Source::Evaluate) {
      o.y = oracle.evaluate(p.action.x, oracle_seed(c, p.iter, p.action.type));
    } else {
      o.d = oracle.compare(p.action.x, p.action.x_b, oracle_seed(c, p.iter, p.action.type));
    }
    camp.submit(o);
  };
  answer(first);
  answer(first);
  Campaign resumed = Campaign::from_json(json::parse(first.to_json().dump()));
  while (!resumed.finished()) answer(resumed);
  CHECK(trajectory_to_csv(resumed.trajectory()) == trajectory_to_csv(full.steps));
}

TEST_CASE("oracle failure stops the run and marks it incomplete") {
  const RunConfig c = quick_config(Policy::EaBo);
  FailingOracle oracle(2);
  const RunResult r = run(c, oracle);
  CHECK(!r.complete);
  CHECK(r.steps.size() == 2);
  CHECK((r.error == "instrument offline" || r.error == "expert unavailable"));
  const json side = run_sidecar(c, r);
  CHECK(side["summary"]["complete"] == false);
}

TEST_CASE("submit rejects outcomes of the wrong kind") {
  Campaign camp(quick_config(Policy::KgEval));
  Outcome wrong;
  wrong.y = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(camp.submit(wrong), ValidationError);
  CHECK(camp.iteration() == 0);
}
