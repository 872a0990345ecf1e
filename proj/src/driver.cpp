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

#include "eabo/driver.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "eabo/errors.hpp"
#include "eabo/numerics/rng.hpp"
#include "eabo/numerics/sobol.hpp"
#include "eabo/state_json.hpp"

namespace eabo {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

constexpr std::array<std::pair<Policy, std::string_view>, 5> kPolicies{{{Policy::EaBo, "ea-bo"},
                                                                         {Policy::KgEval, "kg-eval"},
                                                                         {Policy::KgComp, "kg-comp"},
                                                                         {Policy::RandEval, "rand-eval"},
                                                                         {Policy::RandComp, "rand-comp"}}};

// ---- JSON field access with dotted-path error messages ----

void reject_unknown(const json& obj, const std::string& path, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ValidationError(path, "must be an object");
  for (const auto& [key, value] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

std::string join_path(const std::string& path, std::string_view key) {
  return path.empty() ? std::string(key) : path + "." + std::string(key);
}

template <typename T>
void read(const json& obj, const std::string& path, std::string_view key, T& out) {
  const auto it = obj.find(std::string(key));
  if (it == obj.end()) return;
  const std::string field = join_path(path, key);
  if constexpr (std::is_same_v<T, bool>) {
    if (!it->is_boolean()) throw ValidationError(field, "must be a boolean");
    out = it->get<bool>();
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!it->is_string()) throw ValidationError(field, "must be a string");
    out = it->get<std::string>();
  } else if constexpr (std::is_same_v<T, std::uint64_t>) {
    if (!is_nonnegative_integer(*it)) throw ValidationError(field, "must be a nonnegative integer");
    out = it->get<std::uint64_t>();
  } else if constexpr (std::is_integral_v<T>) {
    if (!it->is_number_integer()) throw ValidationError(field, "must be an integer");
    out = it->get<T>();
  } else {
    if (!it->is_number()) throw ValidationError(field, "must be a number");
    out = it->get<double>();
    if (!std::isfinite(out)) throw ValidationError(field, "must be finite");
  }
}

void require_positive(double v, const std::string& field) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ValidationError(field, "must be positive");
}

json vec_json(const Eigen::VectorXd& v) { return vector_to_json(v); }

// ---- number formatting ----

std::string format_double(double v) { return format_number(v); }

std::string join(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += format_double(v(i));
  }
  return out;
}

double parse_double(const std::string& s, const std::string& field) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw ValidationError(field, "not a number: '" + s + "'");
  }
  return v;
}

Eigen::VectorXd split_doubles(const std::string& s, const std::string& field) {
  std::vector<double> values;
  if (!s.empty()) {
    std::size_t start = 0;
    while (true) {
      const std::size_t end = s.find(';', start);
      values.push_back(parse_double(s.substr(start, end == std::string::npos ? std::string::npos : end - start), field));
      if (end == std::string::npos) break;
      start = end + 1;
    }
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::optional<double> optional_double(const std::string& s, const std::string& field) {
  if (s.empty()) return std::nullopt;
  return parse_double(s, field);
}

std::string optional_text(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

// ---- step (de)serialization ----

json action_json(const Action& a) {
  json j{{"type", source_name(a.type)}, {"x", vec_json(a.x)}, {"cost", a.cost}};
  if (a.type == Source::Compare) j["x_b"] = vec_json(a.x_b);
  return j;
}

Action action_from_json(const json& j) {
  Action a;
  a.type = j.at("type").get<std::string>() == "compare" ? Source::Compare : Source::Evaluate;
  a.x = vector_from_json(j.at("x"), "action.x");
  if (a.type == Source::Compare) a.x_b = vector_from_json(j.at("x_b"), "action.x_b");
  a.cost = j.at("cost").get<double>();
  return a;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

std::optional<double> optional_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

json step_json(const TrajectoryStep& s) {
  json j{{"iter", s.iter},
         {"action", action_json(s.action)},
         {"cum_spend", s.cum_spend},
         {"recommendation", vec_json(s.recommendation)},
         {"norm_utility", optional_json(s.norm_utility)},
         {"voi_eval_raw", optional_json(s.voi_eval_raw)},
         {"voi_comp_raw", optional_json(s.voi_comp_raw)},
         {"chosen_source", s.chosen_source},
         {"wall_ms", s.wall_ms},
         {"warm_start_fingerprint", s.warm_start_fingerprint},
         {"state_fingerprint", s.state_fingerprint}};
  if (s.action.type == Source::Evaluate) {
    j["y"] = vec_json(s.outcome.y);
  } else {
    j["d"] = s.outcome.d;
  }
  return j;
}

TrajectoryStep step_from_json(const json& j) {
  TrajectoryStep s;
  s.iter = j.at("iter").get<int>();
  s.action = action_from_json(j.at("action"));
  s.cum_spend = j.at("cum_spend").get<double>();
  s.recommendation = vector_from_json(j.at("recommendation"), "recommendation");
  s.norm_utility = optional_from_json(j.at("norm_utility"));
  s.voi_eval_raw = optional_from_json(j.at("voi_eval_raw"));
  s.voi_comp_raw = optional_from_json(j.at("voi_comp_raw"));
  s.chosen_source = j.at("chosen_source").get<std::string>();
  s.wall_ms = j.at("wall_ms").get<double>();
  s.warm_start_fingerprint = j.at("warm_start_fingerprint").get<std::uint64_t>();
  s.state_fingerprint = j.at("state_fingerprint").get<std::uint64_t>();
  if (s.action.type == Source::Evaluate) {
    s.outcome.y = vector_from_json(j.at("y"), "y");
  } else {
    s.outcome.d = j.at("d").get<int>();
  }
  return s;
}

json pending_json(const PendingAction& p) {
  return {{"iter", p.iter},
          {"action", action_json(p.action)},
          {"voi_eval_raw", optional_json(p.voi_eval_raw)},
          {"voi_comp_raw", optional_json(p.voi_comp_raw)},
          {"chosen_source", p.chosen_source}};
}

PendingAction pending_from_json(const json& j) {
  PendingAction p;
  p.iter = j.at("iter").get<int>();
  p.action = action_from_json(j.at("action"));
  p.voi_eval_raw = optional_from_json(j.at("voi_eval_raw"));
  p.voi_comp_raw = optional_from_json(j.at("voi_comp_raw"));
  p.chosen_source = j.at("chosen_source").get<std::string>();
  return p;
}

Eigen::VectorXd uniform_point(numerics::Rng& rng, int dim) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Eigen::VectorXd x(dim);
  for (int p = 0; p < dim; ++p) x(p) = unit(rng);
  return x;
}

double overlap(double a0, double a1, double b0, double b1) { return std::max(0.0, std::min(a1, b1) - std::max(a0, b0)); }

}  // namespace

// ---- config ----

std::string_view policy_name(Policy policy) {
  for (const auto& [p, name] : kPolicies) {
    if (p == policy) return name;
  }
  return "";
}

Policy parse_policy(std::string_view name) {
  for (const auto& [p, n] : kPolicies) {
    if (n == name) return p;
  }
  throw ValidationError("policy", "unknown policy '" + std::string(name) +
                                      "' (expected ea-bo, kg-eval, kg-comp, rand-eval or rand-comp)");
}

Utility UtilitySpec::build(int outputs) const {
  if (weights) {
    if (weights->size() != outputs) {
      throw ValidationError("utility.weights", "expected " + std::to_string(outputs) + " weights, got " +
                                                   std::to_string(weights->size()));
    }
    if (!weights->allFinite()) throw ValidationError("utility.weights", "must be finite");
    if (kind == Utility::Kind::Chebyshev && (weights->array() <= 0.0).any()) {
      throw ValidationError("utility.weights", "Chebyshev weights must be positive");
    }
    return kind == Utility::Kind::Linear ? Utility::linear(*weights) : Utility::chebyshev(*weights);
  }
  return kind == Utility::Kind::Linear ? Utility::default_linear(outputs) : Utility::default_chebyshev(outputs);
}

void RunConfig::validate(bool require_benchmark) {
  if (benchmark.empty()) {
    if (require_benchmark) throw ValidationError("benchmark", "is required");
    if (dim < 1) throw ValidationError("dim", "must be a positive integer when no benchmark is given");
    if (outputs < 1) throw ValidationError("outputs", "must be a positive integer when no benchmark is given");
  } else {
    const Benchmark& b = Benchmark::get(benchmark);
    if (dim != 0 && dim != b.dim()) throw ValidationError("dim", "does not match benchmark " + benchmark);
    if (outputs != 0 && outputs != b.outputs()) throw ValidationError("outputs", "does not match benchmark " + benchmark);
    dim = b.dim();
    outputs = b.outputs();
  }
  if (dim > numerics::kMaxSobolDimension / 2) throw ValidationError("dim", "at most 10 dimensions are supported");
  if (utility.kind == Utility::Kind::Chebyshev && outputs > 2) {
    throw ValidationError("utility.kind", "the Chebyshev utility supports at most 2 outputs");
  }
  (void)utility.build(outputs);
  costs.validate();
  require_positive(noise.sigma_eval, "noise.sigma_eval");
  require_positive(noise.sigma_comp, "noise.sigma_comp");
  if (surrogate.inducing < 0) throw ValidationError("surrogate.inducing", "must be nonnegative");
  require_positive(surrogate.learning_rate, "surrogate.lr");
  if (surrogate.cold_steps < 0) throw ValidationError("surrogate.cold_steps", "must be nonnegative");
  if (surrogate.warm_steps < 0) throw ValidationError("surrogate.warm_steps", "must be nonnegative");
  if (!(surrogate.natural_step > 0.0 && surrogate.natural_step <= 1.0)) {
    throw ValidationError("surrogate.natural_step", "must lie in (0, 1]");
  }
  acquisition.validate();
  const SourceSet s = sources();
  const double cheapest = s.evaluate && s.compare ? costs.cheapest() : (s.evaluate ? costs.c_eval : costs.c_comp);
  if (costs.budget < cheapest) {
    spdlog::info("budget {} is below the cheapest enabled action; the run will take no steps", costs.budget);
  }
}

SourceSet RunConfig::sources() const {
  switch (policy) {
    case Policy::KgEval:
    case Policy::RandEval: return {true, false};
    case Policy::KgComp:
    case Policy::RandComp: return {false, true};
    case Policy::EaBo: break;
  }
  return {true, true};
}

RunConfig run_config_from_json(const json& doc, bool require_benchmark) {
  RunConfig c;
  reject_unknown(doc, "",
                 {"schema_version", "benchmark", "dim", "outputs", "utility", "costs", "noise", "policy", "seed",
                  "record_wall_time", "surrogate", "acquisition"});
  int version = kRunConfigSchemaVersion;
  read(doc, "", "schema_version", version);
  if (version != kRunConfigSchemaVersion) {
    throw ValidationError("schema_version", "unsupported version " + std::to_string(version));
  }
  read(doc, "", "benchmark", c.benchmark);
  read(doc, "", "dim", c.dim);
  read(doc, "", "outputs", c.outputs);
  if (doc.contains("utility")) {
    const json& u = doc["utility"];
    reject_unknown(u, "utility", {"kind", "weights"});
    std::string kind = "linear";
    read(u, "utility", "kind", kind);
    if (kind == "linear") {
      c.utility.kind = Utility::Kind::Linear;
    } else if (kind == "chebyshev") {
      c.utility.kind = Utility::Kind::Chebyshev;
    } else {
      throw ValidationError("utility.kind", "expected 'linear' or 'chebyshev'");
    }
    if (u.contains("weights")) {
      const json& w = u["weights"];
      if (!w.is_array() || w.empty()) throw ValidationError("utility.weights", "must be a nonempty array of numbers");
      for (const auto& e : w) {
        if (!e.is_number()) throw ValidationError("utility.weights", "must be a nonempty array of numbers");
      }
      c.utility.weights = vector_from_json(w, "utility.weights");
    }
  }
  if (doc.contains("costs")) {
    const json& k = doc["costs"];
    reject_unknown(k, "costs", {"c_eval", "c_comp", "budget"});
    read(k, "costs", "c_eval", c.costs.c_eval);
    read(k, "costs", "c_comp", c.costs.c_comp);
    read(k, "costs", "budget", c.costs.budget);
  }
  if (doc.contains("noise")) {
    const json& n = doc["noise"];
    reject_unknown(n, "noise", {"sigma_eval", "sigma_comp", "learn"});
    read(n, "noise", "sigma_eval", c.noise.sigma_eval);
    read(n, "noise", "sigma_comp", c.noise.sigma_comp);
    read(n, "noise", "learn", c.noise.learn);
  }
  if (doc.contains("policy")) {
    std::string p;
    read(doc, "", "policy", p);
    c.policy = parse_policy(p);
  }
  read(doc, "", "seed", c.seed);
  read(doc, "", "record_wall_time", c.record_wall_time);
  if (doc.contains("surrogate")) {
    const json& s = doc["surrogate"];
    reject_unknown(s, "surrogate", {"inducing", "lr", "cold_steps", "warm_steps", "natural_step", "learn_inducing"});
    read(s, "surrogate", "inducing", c.surrogate.inducing);
    read(s, "surrogate", "lr", c.surrogate.learning_rate);
    read(s, "surrogate", "cold_steps", c.surrogate.cold_steps);
    read(s, "surrogate", "warm_steps", c.surrogate.warm_steps);
    read(s, "surrogate", "natural_step", c.surrogate.natural_step);
    read(s, "surrogate", "learn_inducing", c.surrogate.learn_inducing);
  }
  if (doc.contains("acquisition")) {
    const json& a = doc["acquisition"];
    reject_unknown(a, "acquisition",
                   {"restarts", "steps", "lr", "clip_norm", "K", "mc_draws", "epsilon", "inner_jitter",
                    "utility_candidates", "utility_starts", "utility_steps", "utility_lr"});
    auto& q = c.acquisition;
    read(a, "acquisition", "restarts", q.restarts);
    read(a, "acquisition", "steps", q.steps);
    read(a, "acquisition", "lr", q.learning_rate);
    read(a, "acquisition", "clip_norm", q.clip_norm);
    read(a, "acquisition", "K", q.fantasy_points);
    read(a, "acquisition", "mc_draws", q.mc_draws);
    read(a, "acquisition", "epsilon", q.epsilon);
    read(a, "acquisition", "inner_jitter", q.inner_jitter);
    read(a, "acquisition", "utility_candidates", q.utility_candidates);
    read(a, "acquisition", "utility_starts", q.utility_starts);
    read(a, "acquisition", "utility_steps", q.utility_steps);
    read(a, "acquisition", "utility_lr", q.utility_learning_rate);
  }
  c.validate(require_benchmark);
  return c;
}

ordered_json run_config_to_json(const RunConfig& c) {
  ordered_json doc;
  doc["schema_version"] = kRunConfigSchemaVersion;
  if (!c.benchmark.empty()) doc["benchmark"] = c.benchmark;
  doc["dim"] = c.dim;
  doc["outputs"] = c.outputs;
  ordered_json u;
  u["kind"] = c.utility.kind == Utility::Kind::Linear ? "linear" : "chebyshev";
  const Utility built = c.utility.build(c.outputs);
  u["weights"] = std::vector<double>(built.weights().data(), built.weights().data() + built.weights().size());
  doc["utility"] = u;
  doc["costs"] = {{"c_eval", c.costs.c_eval}, {"c_comp", c.costs.c_comp}, {"budget", c.costs.budget}};
  doc["noise"] = {{"sigma_eval", c.noise.sigma_eval}, {"sigma_comp", c.noise.sigma_comp}, {"learn", c.noise.learn}};
  doc["policy"] = policy_name(c.policy);
  doc["seed"] = c.seed;
  doc["record_wall_time"] = c.record_wall_time;
  doc["surrogate"] = {{"inducing", c.surrogate.inducing},       {"lr", c.surrogate.learning_rate},
                      {"cold_steps", c.surrogate.cold_steps},   {"warm_steps", c.surrogate.warm_steps},
                      {"natural_step", c.surrogate.natural_step}, {"learn_inducing", c.surrogate.learn_inducing}};
  const auto& q = c.acquisition;
  doc["acquisition"] = {{"restarts", q.restarts},
                        {"steps", q.steps},
                        {"lr", q.learning_rate},
                        {"clip_norm", q.clip_norm},
                        {"K", q.fantasy_points},
                        {"mc_draws", q.mc_draws},
                        {"epsilon", q.epsilon},
                        {"inner_jitter", q.inner_jitter},
                        {"utility_candidates", q.utility_candidates},
                        {"utility_starts", q.utility_starts},
                        {"utility_steps", q.utility_steps},
                        {"utility_lr", q.utility_learning_rate}};
  return doc;
}

// ---- allocation ----

AllocationSummary summarize_allocation(const std::vector<TrajectoryStep>& steps) {
  if (steps.empty()) throw EmptyTrajectory("summarize_allocation: trajectory has no steps");
  const double total = steps.back().cum_spend;
  AllocationSummary s;
  if (!(total > 0.0)) return s;
  const double q = total / 4.0;
  double comp = 0.0, early = 0.0, late = 0.0;
  for (const TrajectoryStep& step : steps) {
    if (step.action.type != Source::Compare) continue;
    const double end = step.cum_spend;
    const double start = end - step.action.cost;
    comp += step.action.cost;
    early += overlap(start, end, 0.0, q);
    late += overlap(start, end, total - q, total);
  }
  s.comparison_fraction = comp / total;
  s.early_fraction = early / q;
  s.late_fraction = late / q;
  return s;
}

// ---- campaign ----

Campaign::Campaign(RunConfig config) : config_(std::move(config)) {
  config_.validate(false);
  utility_ = config_.build_utility();
  if (!config_.benchmark.empty()) {
    benchmark_ = &Benchmark::get(config_.benchmark);
    optimum_value_ = benchmark_->optimum(utility_).value;
  }
  refit_and_recommend();
  select_next();
}

std::uint64_t Campaign::stream(std::string_view name, std::uint64_t counter) const {
  return numerics::derive_seed(config_.seed, name, counter);
}

std::optional<double> Campaign::norm_utility() const {
  if (!benchmark_ || !optimum_value_) return std::nullopt;
  return utility_.value(benchmark_->evaluate_truth(recommendation_)) / *optimum_value_;
}

void Campaign::refit_and_recommend() {
  FitConfig fc = config_.surrogate;
  fc.noise_eval_std = config_.noise.sigma_eval;
  fc.noise_comp_std = config_.noise.sigma_comp;
  fc.learn_noise_eval = config_.noise.learn;
  fc.learn_noise_comp = config_.noise.learn;
  std::optional<VariationalState> warm;
  if (fitted_) warm = state_;
  const FitResult r = fit(data_, utility_, config_.dim, fc, warm, stream("surrogate-init"));
  state_ = r.state;
  last_fingerprint_ = r.warm_start_fingerprint;
  fitted_ = true;
  spdlog::debug("iter {}: fit elbo {:.6g} (from {:.6g}), warm start {:016x}", iteration_, r.elbo, r.initial_elbo,
                r.warm_start_fingerprint);

  const Posterior post(state_);
  const UtilityQuadrature quad = UtilityQuadrature::for_outputs(config_.outputs);
  std::vector<Eigen::VectorXd> extra;
  if (recommendation_.size() == config_.dim) extra.push_back(recommendation_);
  for (const EvalRecord& e : data_.evals) extra.push_back(e.x);
  const DatasetUtility du =
      dataset_utility(post, utility_, quad, config_.acquisition, stream("recommendation", iteration_), extra);
  recommendation_ = du.argmax;
  recommendation_value_ = du.value;
}

void Campaign::select_next() {
  pending_.reset();
  const SourceSet sources = config_.sources();
  const bool eval_ok = sources.evaluate && config_.costs.c_eval <= remaining();
  const bool comp_ok = sources.compare && config_.costs.c_comp <= remaining();
  if (!eval_ok && !comp_ok) return;

  PendingAction p;
  p.iter = iteration_;
  if (config_.policy == Policy::RandEval || config_.policy == Policy::RandComp) {
    numerics::Rng rng(stream("random-policy", iteration_));
    if (eval_ok) {
      p.action = Action::evaluate(uniform_point(rng, config_.dim), config_.costs.c_eval);
    } else {
      Eigen::VectorXd a = uniform_point(rng, config_.dim);
      p.action = Action::compare(std::move(a), uniform_point(rng, config_.dim), config_.costs.c_comp);
    }
    p.chosen_source = "random";
  } else {
    const Posterior post(state_);
    const UtilityQuadrature quad = UtilityQuadrature::for_outputs(config_.outputs);
    const DatasetUtility current{recommendation_value_, recommendation_};
    const Selection sel = select_action(post, utility_, quad, config_.costs, remaining(), config_.acquisition,
                                        current, sources, stream("acquisition", iteration_));
    p.action = sel.action;
    if (sel.eval) p.voi_eval_raw = sel.eval->voi_raw;
    if (sel.comp) p.voi_comp_raw = sel.comp->voi_raw;
    p.chosen_source = sel.degenerate ? "random" : std::string(source_name(sel.action.type));
  }
  pending_ = std::move(p);
}

void Campaign::submit(const Outcome& outcome) {
  if (!pending_) throw ValidationError("", "the session is finished; no action is pending");
  const auto start = std::chrono::steady_clock::now();
  const PendingAction p = *pending_;
  if (p.action.type == Source::Evaluate) {
    if (outcome.y.size() != config_.outputs) {
      throw ValidationError("y", "expected " + std::to_string(config_.outputs) + " values");
    }
    if (!outcome.y.allFinite()) throw ValidationError("y", "must be finite");
    data_.evals.push_back({p.action.x, outcome.y});
  } else {
    if (outcome.d != 0 && outcome.d != 1) throw ValidationError("d", "must be 0 or 1");
    data_.comps.push_back({p.action.x, p.action.x_b, outcome.d});
  }
  spent_ += p.action.cost;
  refit_and_recommend();

  TrajectoryStep step;
  step.iter = p.iter;
  step.action = p.action;
  step.cum_spend = spent_;
  step.outcome = p.action.type == Source::Evaluate ? Outcome{outcome.y, -1} : Outcome{{}, outcome.d};
  step.recommendation = recommendation_;
  step.norm_utility = norm_utility();
  step.voi_eval_raw = p.voi_eval_raw;
  step.voi_comp_raw = p.voi_comp_raw;
  step.chosen_source = p.chosen_source;
  step.warm_start_fingerprint = last_fingerprint_;
  step.state_fingerprint = state_.fingerprint();
  ++iteration_;
  select_next();
  if (config_.record_wall_time) {
    step.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  }
  steps_.push_back(std::move(step));
}

json Campaign::to_json() const {
  json evals = json::array(), comps = json::array(), steps = json::array();
  for (const EvalRecord& e : data_.evals) evals.push_back({{"x", vec_json(e.x)}, {"y", vec_json(e.y)}});
  for (const CompRecord& c : data_.comps) {
    comps.push_back({{"x_a", vec_json(c.x_a)}, {"x_b", vec_json(c.x_b)}, {"d", c.d}});
  }
  for (const TrajectoryStep& s : steps_) steps.push_back(step_json(s));
  return json{{"config", run_config_to_json(config_)},
              {"data", {{"evals", evals}, {"comps", comps}}},
              {"state", state_to_json(state_)},
              {"last_fingerprint", last_fingerprint_},
              {"recommendation", vec_json(recommendation_)},
              {"recommendation_value", recommendation_value_},
              {"spent", spent_},
              {"iteration", iteration_},
              {"pending", pending_ ? pending_json(*pending_) : json(nullptr)},
              {"steps", steps}};
}

Campaign Campaign::from_json(const json& doc) {
  Campaign c;
  c.config_ = run_config_from_json(doc.at("config"), false);
  c.utility_ = c.config_.build_utility();
  if (!c.config_.benchmark.empty()) {
    c.benchmark_ = &Benchmark::get(c.config_.benchmark);
    c.optimum_value_ = c.benchmark_->optimum(c.utility_).value;
  }
  for (const json& e : doc.at("data").at("evals")) {
    c.data_.evals.push_back({vector_from_json(e.at("x"), "data.evals.x"), vector_from_json(e.at("y"), "data.evals.y")});
  }
  for (const json& e : doc.at("data").at("comps")) {
    c.data_.comps.push_back({vector_from_json(e.at("x_a"), "data.comps.x_a"),
                             vector_from_json(e.at("x_b"), "data.comps.x_b"), e.at("d").get<int>()});
  }
  c.data_.validate(c.config_.dim, c.config_.outputs);
  c.state_ = state_from_json(doc.at("state"));
  c.fitted_ = true;
  c.last_fingerprint_ = doc.at("last_fingerprint").get<std::uint64_t>();
  c.recommendation_ = vector_from_json(doc.at("recommendation"), "recommendation");
  c.recommendation_value_ = doc.at("recommendation_value").get<double>();
  c.spent_ = doc.at("spent").get<double>();
  c.iteration_ = doc.at("iteration").get<int>();
  if (!doc.at("pending").is_null()) c.pending_ = pending_from_json(doc.at("pending"));
  for (const json& s : doc.at("steps")) c.steps_.push_back(step_from_json(s));
  return c;
}

// ---- batch runs ----

std::uint64_t oracle_seed(const RunConfig& config, int iter, Source source) {
  return numerics::derive_seed(config.seed, source == Source::Evaluate ? "oracle-noise" : "expert-response",
                               static_cast<std::uint64_t>(iter));
}

RunResult run(const RunConfig& config, Oracle& oracle) {
  Campaign campaign(config);
  RunResult result;
  while (const auto& pending = campaign.pending()) {
    const Action& a = pending->action;
    Outcome outcome;
    try {
      if (a.type == Source::Evaluate) {
        outcome.y = oracle.evaluate(a.x, oracle_seed(campaign.config(), pending->iter, a.type));
      } else {
        outcome.d = oracle.compare(a.x, a.x_b, oracle_seed(campaign.config(), pending->iter, a.type));
      }
    } catch (const OracleFailure& e) {
      spdlog::error("oracle failure at iteration {}: {}", pending->iter, e.what());
      result.complete = false;
      result.error = e.what();
      break;
    }
    campaign.submit(outcome);
    const TrajectoryStep& last = campaign.trajectory().back();
    spdlog::info("iter {} {} spend {:g}/{:g}{}", last.iter, source_name(last.action.type),
                 campaign.spent(), campaign.config().costs.budget,
                 campaign.norm_utility() ? fmt::format(" norm utility {:.4f}", *campaign.norm_utility()) : "");
  }
  result.steps = campaign.trajectory();
  result.recommendation = campaign.recommendation();
  result.final_norm_utility = campaign.norm_utility();
  result.spent = campaign.spent();
  return result;
}

RunResult run(const RunConfig& config) {
  RunConfig resolved = config;
  resolved.validate(true);
  SimulatedOracle oracle(Benchmark::get(resolved.benchmark), resolved.build_utility(), resolved.noise.sigma_eval,
                         resolved.noise.sigma_comp);
  return run(resolved, oracle);
}

// ---- files ----

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string trajectory_csv_header() {
  return "iter,action_type,action_coords,cost,cum_spend,outcome,rec_coords,norm_utility,voi_eval_raw,voi_comp_raw,"
         "chosen_source,wall_ms";
}

std::string trajectory_to_csv(const std::vector<TrajectoryStep>& steps) {
  std::string out = trajectory_csv_header() + "\n";
  for (const TrajectoryStep& s : steps) {
    Eigen::VectorXd coords = s.action.x;
    if (s.action.type == Source::Compare) {
      coords.resize(s.action.x.size() + s.action.x_b.size());
      coords << s.action.x, s.action.x_b;
    }
    const std::string outcome = s.action.type == Source::Evaluate ? join(s.outcome.y) : std::to_string(s.outcome.d);
    out += std::to_string(s.iter) + "," + std::string(source_name(s.action.type)) + "," + join(coords) + "," +
           format_double(s.action.cost) + "," + format_double(s.cum_spend) + "," + outcome + "," +
           join(s.recommendation) + "," + optional_text(s.norm_utility) + "," + optional_text(s.voi_eval_raw) + "," +
           optional_text(s.voi_comp_raw) + "," + s.chosen_source + "," + format_double(s.wall_ms) + "\n";
  }
  return out;
}

std::vector<TrajectoryStep> trajectory_from_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != trajectory_csv_header()) {
    throw ValidationError("csv", "missing or unexpected trajectory header");
  }
  std::vector<TrajectoryStep> steps;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    const std::string where = "csv row " + std::to_string(row);
    if (cells.size() != 12) throw ValidationError(where, "expected 12 columns");
    TrajectoryStep s;
    s.iter = static_cast<int>(parse_double(cells[0], where + " iter"));
    const Eigen::VectorXd coords = split_doubles(cells[2], where + " action_coords");
    const double cost = parse_double(cells[3], where + " cost");
    if (cells[1] == "evaluate") {
      s.action = Action::evaluate(coords, cost);
      s.outcome.y = split_doubles(cells[5], where + " outcome");
    } else if (cells[1] == "compare") {
      const Eigen::Index half = coords.size() / 2;
      s.action = Action::compare(coords.head(half), coords.tail(half), cost);
      s.outcome.d = static_cast<int>(parse_double(cells[5], where + " outcome"));
    } else {
      throw ValidationError(where + " action_type", "expected evaluate or compare");
    }
    s.cum_spend = parse_double(cells[4], where + " cum_spend");
    s.recommendation = split_doubles(cells[6], where + " rec_coords");
    s.norm_utility = optional_double(cells[7], where + " norm_utility");
    s.voi_eval_raw = optional_double(cells[8], where + " voi_eval_raw");
    s.voi_comp_raw = optional_double(cells[9], where + " voi_comp_raw");
    s.chosen_source = cells[10];
    s.wall_ms = parse_double(cells[11], where + " wall_ms");
    steps.push_back(std::move(s));
  }
  return steps;
}

ordered_json run_sidecar(const RunConfig& config, const RunResult& result) {
  ordered_json summary;
  summary["complete"] = result.complete;
  if (!result.complete) summary["error"] = result.error;
  int n_eval = 0, n_comp = 0;
  for (const TrajectoryStep& s : result.steps) (s.action.type == Source::Evaluate ? n_eval : n_comp)++;
  summary["steps"] = result.steps.size();
  summary["n_eval"] = n_eval;
  summary["n_comp"] = n_comp;
  summary["spent"] = result.spent;
  summary["final_recommendation"] = std::vector<double>(result.recommendation.data(),
                                                        result.recommendation.data() + result.recommendation.size());
  summary["final_norm_utility"] = result.final_norm_utility ? ordered_json(*result.final_norm_utility) : ordered_json();
  if (!result.steps.empty()) {
    const AllocationSummary a = summarize_allocation(result.steps);
    summary["comparison_fraction"] = a.comparison_fraction;
    summary["early_comparison_fraction"] = a.early_fraction;
    summary["late_comparison_fraction"] = a.late_fraction;
  } else {
    summary["comparison_fraction"] = 0.0;
    summary["early_comparison_fraction"] = 0.0;
    summary["late_comparison_fraction"] = 0.0;
  }
  ordered_json fingerprints = ordered_json::array();
  for (const TrajectoryStep& s : result.steps) {
    fingerprints.push_back({{"warm_start", s.warm_start_fingerprint}, {"state", s.state_fingerprint}});
  }
  ordered_json doc;
  doc["schema_version"] = kRunConfigSchemaVersion;
  doc["config"] = run_config_to_json(config);
  doc["summary"] = summary;
  doc["fit_fingerprints"] = fingerprints;
  return doc;
}

void write_run_files(const std::string& stem, const RunConfig& config, const RunResult& result) {
  const std::filesystem::path base(stem);
  if (base.has_parent_path()) std::filesystem::create_directories(base.parent_path());
  auto write_atomic = [](const std::filesystem::path& path, const std::string& text) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
      std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
      f << text;
      if (!f) throw Error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  };
  write_atomic(stem + ".csv", trajectory_to_csv(result.steps));
  write_atomic(stem + ".json", run_sidecar(config, result).dump(2) + "\n");
}

}  // namespace eabo
