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

#include "eabo/benchmarks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <numeric>
#include <random>

#include <json.hpp>

#include "eabo/errors.hpp"
#include "eabo/numerics/normal.hpp"
#include "eabo/numerics/rng.hpp"
#include "eabo/numerics/sobol.hpp"

namespace eabo {
namespace {

using std::numbers::pi;

double branin(double x1, double x2) {
  const double b = 5.1 / (4.0 * pi * pi);
  const double c = 5.0 / pi;
  const double t = 1.0 / (8.0 * pi);
  const double q = x2 - b * x1 * x1 + c * x1 - 6.0;
  return q * q + 10.0 * (1.0 - t) * std::cos(x1) + 10.0;
}

double branin_unit(const Eigen::VectorXd& u) { return branin(15.0 * u(0) - 5.0, 15.0 * u(1)); }

double hartmann6(const Eigen::VectorXd& u) {
  static constexpr std::array<double, 4> alpha{1.0, 1.2, 3.0, 3.2};
  static constexpr double a[4][6] = {{10, 3, 17, 3.5, 1.7, 8},
                                     {0.05, 10, 17, 0.1, 8, 14},
                                     {3, 3.5, 1.7, 10, 17, 8},
                                     {17, 8, 0.05, 10, 0.1, 14}};
  static constexpr double p[4][6] = {{1312, 1696, 5569, 124, 8283, 5886},
                                     {2329, 4135, 8307, 3736, 1004, 9991},
                                     {2348, 1451, 3522, 2883, 3047, 6650},
                                     {4047, 8828, 8732, 5743, 1091, 381}};
  double total = 0.0;
  for (int i = 0; i < 4; ++i) {
    double inner = 0.0;
    for (int k = 0; k < 6; ++k) {
      const double diff = u(k) - 1e-4 * p[i][k];
      inner += a[i][k] * diff * diff;
    }
    total += alpha[i] * std::exp(-inner);
  }
  return -total;
}

double currin(const Eigen::VectorXd& u) {
  const double x1 = u(0);
  const double x2 = u(1);
  const double factor = x2 > 0.0 ? 1.0 - std::exp(-1.0 / (2.0 * x2)) : 1.0;
  const double num = 2300.0 * x1 * x1 * x1 + 1900.0 * x1 * x1 + 2092.0 * x1 + 60.0;
  const double den = 100.0 * x1 * x1 * x1 + 500.0 * x1 * x1 + 4.0 * x1 + 20.0;
  return factor * num / den;
}

Eigen::Vector2d vlmop2(const Eigen::VectorXd& u) {
  const Eigen::Index d = u.size();
  const double shift = 1.0 / std::sqrt(static_cast<double>(d));
  double s1 = 0.0, s2 = 0.0;
  for (Eigen::Index k = 0; k < d; ++k) {
    const double x = 4.0 * u(k) - 2.0;
    s1 += (x - shift) * (x - shift);
    s2 += (x + shift) * (x + shift);
  }
  return {1.0 - std::exp(-s1), 1.0 - std::exp(-s2)};
}

constexpr std::array<BenchmarkId, 4> kAll{BenchmarkId::Branin, BenchmarkId::Hartmann6, BenchmarkId::BraninCurrin,
                                          BenchmarkId::Vlmop2};

BenchmarkId id_from_name(std::string_view name) {
  for (BenchmarkId id : kAll) {
    if (benchmark_name(id) == name) return id;
  }
  throw ValidationError("benchmark", "unknown benchmark '" + std::string(name) + "'");
}

void check_domain(const Eigen::VectorXd& x, int dim, const char* where) {
  if (x.size() != dim) {
    throw DimensionMismatch(std::string(where) + ": expected " + std::to_string(dim) + " coordinates");
  }
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    if (!(x(k) >= 0.0 && x(k) <= 1.0)) throw OutOfDomain(std::string(where) + ": point outside [0,1]^d");
  }
}

std::string kind_name(Utility::Kind kind) { return kind == Utility::Kind::Linear ? "linear" : "chebyshev"; }

Utility::Kind effective_kind(const Utility& u) { return u.is_linear() ? Utility::Kind::Linear : Utility::Kind::Chebyshev; }

// Compass search with step halving; keeps iterates in the unit box.
Eigen::VectorXd compass_search(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x, double step,
                               double min_step) {
  double best = f(x);
  while (step > min_step) {
    bool improved = false;
    for (Eigen::Index k = 0; k < x.size(); ++k) {
      for (double sign : {1.0, -1.0}) {
        Eigen::VectorXd y = x;
        y(k) = std::clamp(y(k) + sign * step, 0.0, 1.0);
        const double v = f(y);
        if (v > best) {
          best = v;
          x = y;
          improved = true;
        }
      }
    }
    if (!improved) step *= 0.5;
  }
  return x;
}

}  // namespace

std::string_view benchmark_name(BenchmarkId id) {
  switch (id) {
    case BenchmarkId::Branin: return "branin";
    case BenchmarkId::Hartmann6: return "hartmann6";
    case BenchmarkId::BraninCurrin: return "branin_currin";
    case BenchmarkId::Vlmop2: return "vlmop2";
  }
  return "";
}

int benchmark_dim(BenchmarkId id) { return id == BenchmarkId::Hartmann6 ? 6 : 2; }

int benchmark_outputs(BenchmarkId id) {
  return id == BenchmarkId::BraninCurrin || id == BenchmarkId::Vlmop2 ? 2 : 1;
}

Eigen::VectorXd classical_objective(BenchmarkId id, const Eigen::VectorXd& u) {
  check_domain(u, benchmark_dim(id), "classical_objective");
  switch (id) {
    case BenchmarkId::Branin: return Eigen::VectorXd::Constant(1, branin_unit(u));
    case BenchmarkId::Hartmann6: return Eigen::VectorXd::Constant(1, hartmann6(u));
    case BenchmarkId::BraninCurrin: return Eigen::Vector2d(branin_unit(u), currin(u));
    case BenchmarkId::Vlmop2: return vlmop2(u);
  }
  return {};
}

Benchmark::Benchmark(BenchmarkId id, Standardization standardization, std::vector<Optimum> optima)
    : id_(id),
      name_(benchmark_name(id)),
      dim_(benchmark_dim(id)),
      outputs_(benchmark_outputs(id)),
      standardization_(std::move(standardization)),
      optima_(std::move(optima)) {
  if (standardization_.mean.size() != outputs_ || standardization_.std.size() != outputs_) {
    throw ValidationError("benchmarks." + name_, "standardization has the wrong number of outputs");
  }
  if ((standardization_.std.array() <= 0.0).any()) {
    throw ValidationError("benchmarks." + name_ + ".std", "must be positive");
  }
}

const Benchmark& Benchmark::get(std::string_view name) {
  static const std::vector<Benchmark> table = benchmark_constants_from_json(embedded_benchmark_constants());
  const BenchmarkId id = id_from_name(name);
  for (const Benchmark& b : table) {
    if (b.id() == id) return b;
  }
  throw ValidationError("benchmark", "no stored constants for '" + std::string(name) + "'");
}

std::vector<std::string> Benchmark::names() {
  std::vector<std::string> out;
  for (BenchmarkId id : kAll) out.emplace_back(benchmark_name(id));
  return out;
}

Eigen::VectorXd Benchmark::oriented(const Eigen::VectorXd& x) const { return -classical_objective(id_, x); }

Eigen::VectorXd Benchmark::evaluate_truth(const Eigen::VectorXd& x) const {
  check_domain(x, dim_, "evaluate_truth");
  return ((oriented(x) - standardization_.mean).array() / standardization_.std.array()).matrix();
}

Optimum Benchmark::optimum(const Utility& utility) const {
  if (utility.outputs() != outputs_) {
    throw ValidationError("utility.weights", "benchmark " + name_ + " has " + std::to_string(outputs_) + " outputs");
  }
  const Utility::Kind kind = effective_kind(utility);
  for (const Optimum& o : optima_) {
    if (o.kind == kind && o.weights.size() == utility.weights().size() &&
        (o.weights - utility.weights()).cwiseAbs().maxCoeff() <= 1e-12) {
      return o;
    }
  }
  std::vector<Eigen::VectorXd> starts;
  for (const Optimum& o : optima_) starts.push_back(o.argmax);
  return search_optimum(*this, utility, starts, kStandardizationSamples, 8);
}

double Benchmark::normalized_utility(const Utility& utility, const Eigen::VectorXd& x) const {
  return utility.value(evaluate_truth(x)) / optimum(utility).value;
}

Standardization derive_standardization(BenchmarkId id) {
  const int dim = benchmark_dim(id);
  const int m = benchmark_outputs(id);
  const Eigen::MatrixXd pts = numerics::sobol_points(kStandardizationSamples, dim, kStandardizationSeed);
  Eigen::MatrixXd values(pts.rows(), m);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    values.row(i) = -classical_objective(id, pts.row(i).transpose()).transpose();
  }
  Standardization s;
  s.mean = values.colwise().mean().transpose();
  s.std.resize(m);
  for (int j = 0; j < m; ++j) {
    s.std(j) = std::sqrt((values.col(j).array() - s.mean(j)).square().mean());
  }
  return s;
}

Optimum search_optimum(const Benchmark& benchmark, const Utility& utility, const std::vector<Eigen::VectorXd>& starts,
                       int sobol_count, int refine) {
  auto score = [&](const Eigen::VectorXd& x) { return utility.value(benchmark.evaluate_truth(x)); };
  std::vector<Eigen::VectorXd> candidates = starts;
  const Eigen::MatrixXd pts = numerics::sobol_points(sobol_count, benchmark.dim(), kStandardizationSeed);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) candidates.push_back(pts.row(i).transpose());
  std::vector<double> values(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) values[i] = score(candidates[i]);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t keep = std::min<std::size_t>(std::max(refine, 1), order.size());
  std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                    [&](std::size_t a, std::size_t b) { return values[a] > values[b]; });

  Optimum best{effective_kind(utility), utility.weights(), values[order[0]], candidates[order[0]]};
  for (std::size_t r = 0; r < keep; ++r) {
    const Eigen::VectorXd x = compass_search(score, candidates[order[r]], 0.02, 1e-10);
    const double v = score(x);
    if (v > best.value) {
      best.value = v;
      best.argmax = x;
    }
  }
  return best;
}

std::string benchmark_constants_to_json(const std::vector<Benchmark>& benchmarks) {
  using nlohmann::ordered_json;
  ordered_json doc;
  doc["schema_version"] = kBenchmarkConstantsVersion;
  doc["orientation"] = "negate-then-standardize";
  doc["standardization_sample"] = {{"sequence", "sobol"}, {"count", kStandardizationSamples},
                                   {"seed", kStandardizationSeed}};
  ordered_json list = ordered_json::object();
  for (const Benchmark& b : benchmarks) {
    ordered_json entry;
    entry["dim"] = b.dim();
    entry["outputs"] = b.outputs();
    entry["mean"] = std::vector<double>(b.standardization().mean.data(),
                                        b.standardization().mean.data() + b.outputs());
    entry["std"] = std::vector<double>(b.standardization().std.data(), b.standardization().std.data() + b.outputs());
    ordered_json optima = ordered_json::array();
    for (const Optimum& o : b.stored_optima()) {
      optima.push_back({{"utility", kind_name(o.kind)},
                        {"weights", std::vector<double>(o.weights.data(), o.weights.data() + o.weights.size())},
                        {"value", o.value},
                        {"argmax", std::vector<double>(o.argmax.data(), o.argmax.data() + o.argmax.size())}});
    }
    entry["optima"] = optima;
    list[b.name()] = entry;
  }
  doc["benchmarks"] = list;
  return doc.dump(2) + "\n";
}

std::vector<Benchmark> benchmark_constants_from_json(std::string_view text) {
  const nlohmann::json doc = nlohmann::json::parse(text);
  if (doc.value("schema_version", 0) != kBenchmarkConstantsVersion) {
    throw ValidationError("schema_version", "unsupported benchmark constants version");
  }
  auto vec = [](const nlohmann::json& j) {
    const std::vector<double> v = j.get<std::vector<double>>();
    return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  };
  std::vector<Benchmark> out;
  for (const auto& [name, entry] : doc.at("benchmarks").items()) {
    const BenchmarkId id = id_from_name(name);
    std::vector<Optimum> optima;
    for (const auto& o : entry.at("optima")) {
      const std::string kind = o.at("utility").get<std::string>();
      optima.push_back({kind == "linear" ? Utility::Kind::Linear : Utility::Kind::Chebyshev, vec(o.at("weights")),
                        o.at("value").get<double>(), vec(o.at("argmax"))});
    }
    out.emplace_back(id, Standardization{vec(entry.at("mean")), vec(entry.at("std"))}, std::move(optima));
  }
  return out;
}

SimulatedOracle::SimulatedOracle(const Benchmark& benchmark, Utility utility, double sigma_eval, double sigma_comp)
    : benchmark_(&benchmark), utility_(std::move(utility)), sigma_eval_(sigma_eval), sigma_comp_(sigma_comp) {
  if (!(sigma_eval >= 0.0)) throw ValidationError("noise.sigma_eval", "must be nonnegative");
  if (!(sigma_comp >= 0.0)) throw ValidationError("noise.sigma_comp", "must be nonnegative");
  if (utility_.outputs() != benchmark.outputs()) {
    throw ValidationError("utility.weights", "does not match the benchmark output count");
  }
}

Eigen::VectorXd SimulatedOracle::noisy_evaluation(const Eigen::VectorXd& x, std::uint64_t seed) const {
  Eigen::VectorXd y = benchmark_->evaluate_truth(x);
  numerics::Rng rng(numerics::derive_seed(seed, "evaluation-noise"));
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index j = 0; j < y.size(); ++j) y(j) += sigma_eval_ * normal(rng);
  return y;
}

double SimulatedOracle::preference_probability(const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b) const {
  const double gap = utility_.value(benchmark_->evaluate_truth(x_a)) - utility_.value(benchmark_->evaluate_truth(x_b));
  if (sigma_comp_ == 0.0) return gap > 0.0 ? 1.0 : (gap < 0.0 ? 0.0 : 0.5);
  return numerics::normal_cdf(gap / (std::sqrt(2.0) * sigma_comp_));
}

int SimulatedOracle::expert_response(const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b,
                                     std::uint64_t seed) const {
  const double p = preference_probability(x_a, x_b);
  numerics::Rng rng(numerics::derive_seed(seed, "expert-response"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  return unit(rng) < p ? 1 : 0;
}

}  // namespace eabo
