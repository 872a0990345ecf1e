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
#include <string>
#include <string_view>
#include <vector>

#include "eabo/utility.hpp"

namespace eabo {

inline constexpr int kBenchmarkConstantsVersion = 1;
inline constexpr int kStandardizationSamples = 1 << 14;
inline constexpr std::uint64_t kStandardizationSeed = 0;

enum class BenchmarkId { Branin, Hartmann6, BraninCurrin, Vlmop2 };

/// The classical formula on the unit box, in its usual (minimization)
/// orientation and without standardization.
Eigen::VectorXd classical_objective(BenchmarkId id, const Eigen::VectorXd& u);

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
};

struct Optimum {
  Utility::Kind kind = Utility::Kind::Linear;
  Eigen::VectorXd weights;
  double value = 0.0;
  Eigen::VectorXd argmax;
};

class Benchmark {
 public:
  /// Looks a benchmark up by name ("branin", "hartmann6", "branin_currin",
  /// "vlmop2"). Throws ValidationError on an unknown name.
  static const Benchmark& get(std::string_view name);
  static std::vector<std::string> names();

  /// A benchmark built from explicit constants, for the constants generator.
  Benchmark(BenchmarkId id, Standardization standardization, std::vector<Optimum> optima = {});

  BenchmarkId id() const { return id_; }
  const std::string& name() const { return name_; }
  int dim() const { return dim_; }
  int outputs() const { return outputs_; }
  const Standardization& standardization() const { return standardization_; }
  const std::vector<Optimum>& stored_optima() const { return optima_; }

  /// Negated classical outputs, so larger is better.
  Eigen::VectorXd oriented(const Eigen::VectorXd& x) const;
  /// Standardized maximization outputs. Throws OutOfDomain outside [0,1]^d.
  Eigen::VectorXd evaluate_truth(const Eigen::VectorXd& x) const;

  /// max_x U(f(x)): the stored value when the utility matches a stored
  /// entry, otherwise a fresh Sobol-plus-pattern-search estimate.
  Optimum optimum(const Utility& utility) const;
  /// U(f(x)) / U(f(x*)).
  double normalized_utility(const Utility& utility, const Eigen::VectorXd& x) const;

 private:
  BenchmarkId id_;
  std::string name_;
  int dim_;
  int outputs_;
  Standardization standardization_;
  std::vector<Optimum> optima_;
};

std::string_view benchmark_name(BenchmarkId id);
int benchmark_dim(BenchmarkId id);
int benchmark_outputs(BenchmarkId id);

/// Per-output mean and (population) std of the oriented outputs over the
/// fixed Sobol sample.
Standardization derive_standardization(BenchmarkId id);

/// Maximizes U(f(x)) by scoring `starts` and the Sobol sample, then
/// running a compass search from the best `refine` points.
Optimum search_optimum(const Benchmark& benchmark, const Utility& utility, const std::vector<Eigen::VectorXd>& starts,
                       int sobol_count, int refine);

/// The constants file as a JSON string, and its parsed form.
std::string benchmark_constants_to_json(const std::vector<Benchmark>& benchmarks);
std::vector<Benchmark> benchmark_constants_from_json(std::string_view text);
/// The constants file compiled into the library.
std::string_view embedded_benchmark_constants();

/// Abstract answer source for the two action types.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual Eigen::VectorXd evaluate(const Eigen::VectorXd& x, std::uint64_t seed) = 0;
  /// 1 when x_a is preferred to x_b.
  virtual int compare(const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b, std::uint64_t seed) = 0;
};

class SimulatedOracle : public Oracle {
 public:
  SimulatedOracle(const Benchmark& benchmark, Utility utility, double sigma_eval, double sigma_comp);

  /// Truth plus independent N(0, sigma_eval^2) noise per output.
  Eigen::VectorXd noisy_evaluation(const Eigen::VectorXd& x, std::uint64_t seed) const;
  /// Phi((U(f(x_a)) - U(f(x_b))) / (sqrt(2) sigma_comp)) on the noiseless truth.
  double preference_probability(const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b) const;
  int expert_response(const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b, std::uint64_t seed) const;

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, std::uint64_t seed) override { return noisy_evaluation(x, seed); }
  int compare(const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b, std::uint64_t seed) override {
    return expert_response(x_a, x_b, seed);
  }

  const Benchmark& benchmark() const { return *benchmark_; }

 private:
  const Benchmark* benchmark_;
  Utility utility_;
  double sigma_eval_;
  double sigma_comp_;
};

}  // namespace eabo
