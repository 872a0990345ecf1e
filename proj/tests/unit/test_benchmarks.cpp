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
#include <random>

#include "eabo/benchmarks.hpp"
#include "eabo/errors.hpp"
#include "eabo/numerics/sobol.hpp"
#include "../support/random_instances.hpp"

using namespace eabo;

namespace {

// Textbook forms on the original domains, written independently of the library.
double branin_reference(double x1, double x2) {
  const double pi = 3.14159265358979323846;
  const double a = 1.0, b = 5.1 / (4 * pi * pi), c = 5 / pi, r = 6, s = 10, t = 1 / (8 * pi);
  return a * std::pow(x2 - b * x1 * x1 + c * x1 - r, 2) + s * (1 - t) * std::cos(x1) + s;
}

double hartmann6_reference(const Eigen::VectorXd& x) {
  Eigen::Vector4d alpha(1.0, 1.2, 3.0, 3.2);
  Eigen::Matrix<double, 4, 6> a, p;
  a << 10, 3, 17, 3.5, 1.7, 8, 0.05, 10, 17, 0.1, 8, 14, 3, 3.5, 1.7, 10, 17, 8, 17, 8, 0.05, 10, 0.1, 14;
  p << 1312, 1696, 5569, 124, 8283, 5886, 2329, 4135, 8307, 3736, 1004, 9991, 2348, 1451, 3522, 2883, 3047, 6650,
      4047, 8828, 8732, 5743, 1091, 381;
  p *= 1e-4;
  double f = 0;
  for (int i = 0; i < 4; ++i) {
    const Eigen::RowVectorXd d = x.transpose() - p.row(i);
    f -= alpha(i) * std::exp(-(a.row(i).array() * d.array().square()).sum());
  }
  return f;
}

}  // namespace

TEST_CASE("classical formulas agree with reference implementations") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    const Eigen::VectorXd u2 = testing::uniform_point(rng, 2);
    const Eigen::VectorXd u6 = testing::uniform_point(rng, 6);
    CHECK(classical_objective(BenchmarkId::Branin, u2)(0) ==
          doctest::Approx(branin_reference(15 * u2(0) - 5, 15 * u2(1))).epsilon(1e-12));
    CHECK(std::abs(classical_objective(BenchmarkId::Hartmann6, u6)(0) - hartmann6_reference(u6)) < 1e-9);
  }
}

TEST_CASE("classical formulas at frozen points") {
  Eigen::VectorXd u(2);
  u << 0.3, 0.7;
  CHECK(classical_objective(BenchmarkId::Branin, u)(0) == doctest::Approx(31.90971034805942).epsilon(1e-13));
  const Eigen::VectorXd bc = classical_objective(BenchmarkId::BraninCurrin, u);
  CHECK(bc(1) == doctest::Approx(6.821175530419642).epsilon(1e-13));
  const Eigen::VectorXd v = classical_objective(BenchmarkId::Vlmop2, u);
  CHECK(v(0) == doctest::Approx(0.8977157932844626).epsilon(1e-13));
  CHECK(v(1) == doctest::Approx(0.8977157932844625).epsilon(1e-13));
  Eigen::VectorXd opt(2);
  opt << (3.14159265358979323846 + 5) / 15, 2.275 / 15;
  CHECK(classical_objective(BenchmarkId::Branin, opt)(0) == doctest::Approx(0.39788735772973816).epsilon(1e-12));
  Eigen::VectorXd h(6);
  h << 0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573;
  CHECK(classical_objective(BenchmarkId::Hartmann6, h)(0) == doctest::Approx(-3.322368011391339).epsilon(1e-12));
  CHECK(classical_objective(BenchmarkId::Hartmann6, Eigen::VectorXd::Constant(6, 0.5))(0) ==
        doctest::Approx(-0.5053149917022333).epsilon(1e-12));
}

TEST_CASE("stored standardization is reproduced and standardizes the sample") {
  for (const std::string& name : Benchmark::names()) {
    const Benchmark& b = Benchmark::get(name);
    const Standardization s = derive_standardization(b.id());
    CHECK((s.mean - b.standardization().mean).cwiseAbs().maxCoeff() < 1e-6);
    CHECK((s.std - b.standardization().std).cwiseAbs().maxCoeff() < 1e-6);
    const Eigen::MatrixXd pts = numerics::sobol_points(kStandardizationSamples, b.dim(), kStandardizationSeed);
    Eigen::MatrixXd y(pts.rows(), b.outputs());
    for (Eigen::Index i = 0; i < pts.rows(); ++i) y.row(i) = b.evaluate_truth(pts.row(i).transpose()).transpose();
    for (int j = 0; j < b.outputs(); ++j) {
      const double mean = y.col(j).mean();
      const double sd = std::sqrt((y.col(j).array() - mean).square().mean());
      CHECK(std::abs(mean) < 0.02);
      CHECK(std::abs(sd - 1.0) < 0.02);
    }
    std::vector<Utility> us{Utility::default_linear(b.outputs())};
    if (b.outputs() > 1) us.push_back(Utility::default_chebyshev(b.outputs()));
    for (const Utility& u : us) {
      const double opt = b.optimum(u).value;
      for (Eigen::Index i = 0; i < y.rows(); ++i) REQUIRE(u.value(y.row(i).transpose()) <= opt);
      CHECK(b.normalized_utility(u, b.optimum(u).argmax) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("branin optimum matches a dense grid") {
  const Benchmark& b = Benchmark::get("branin");
  // 1001 x 1001 grid maximum of the standardized output, computed offline.
  CHECK(std::abs(b.optimum(Utility::default_linear(1)).value - 1.051843146580135) < 1e-3);
  Eigen::VectorXd opt(2);
  opt << (3.14159265358979323846 + 5) / 15, 2.275 / 15;
  CHECK(b.evaluate_truth(opt)(0) == doctest::Approx(b.optimum(Utility::default_linear(1)).value).epsilon(1e-9));
}

TEST_CASE("vlmop2 outputs swap under reflection through the center") {
  const Benchmark& b = Benchmark::get("vlmop2");
  std::mt19937_64 rng(4);
  for (int i = 0; i < 50; ++i) {
    const Eigen::VectorXd x = testing::uniform_point(rng, 2);
    const Eigen::VectorXd y = b.oriented(x);
    const Eigen::VectorXd r = b.oriented(Eigen::VectorXd::Ones(2) - x);
    CHECK(std::abs(y(0) - r(1)) < 1e-10);
    CHECK(std::abs(y(1) - r(0)) < 1e-10);
    // The two outputs get their own sample constants, so after standardization
    // the swap holds only up to the constant mismatch.
    const Eigen::VectorXd ys = b.evaluate_truth(x);
    const Eigen::VectorXd rs = b.evaluate_truth(Eigen::VectorXd::Ones(2) - x);
    CHECK(std::abs(ys(0) - rs(1)) < 1e-4);
  }
}

TEST_CASE("domain and name errors") {
  CHECK_THROWS_AS(Benchmark::get("rosenbrock"), ValidationError);
  const Benchmark& b = Benchmark::get("branin");
  CHECK_THROWS_AS(b.evaluate_truth(Eigen::Vector2d(1.1, 0.5)), OutOfDomain);
  CHECK_THROWS_AS(b.evaluate_truth(Eigen::Vector2d(std::nan(""), 0.5)), OutOfDomain);
  CHECK_THROWS_AS(b.evaluate_truth(Eigen::VectorXd::Zero(3)), DimensionMismatch);
}

TEST_CASE("simulated oracle noise and preferences") {
  const Benchmark& b = Benchmark::get("branin");
  const Eigen::Vector2d x(0.2, 0.4);
  SimulatedOracle exact(b, Utility::default_linear(1), 0.0, 0.1);
  CHECK(exact.noisy_evaluation(x, 9)(0) == b.evaluate_truth(x)(0));

  SimulatedOracle noisy(b, Utility::default_linear(1), 0.1, 0.1);
  CHECK(noisy.noisy_evaluation(x, 1)(0) == noisy.noisy_evaluation(x, 1)(0));
  CHECK(noisy.noisy_evaluation(x, 1)(0) != noisy.noisy_evaluation(x, 2)(0));
  double sum = 0, sq = 0;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const double e = noisy.noisy_evaluation(x, s)(0) - b.evaluate_truth(x)(0);
    sum += e;
    sq += e * e;
  }
  const double sd = std::sqrt(sq / n - (sum / n) * (sum / n));
  CHECK(std::abs(sd - 0.1) < 0.005);

  CHECK(noisy.preference_probability(x, x) == 0.5);
  // Find a pair whose utility gap is sqrt(2) sigma_comp by bisection on x_b.
  const Eigen::Vector2d xa(0.5427728428039702, 0.15166666852310295);
  const double target = b.evaluate_truth(xa)(0) - std::sqrt(2.0) * 0.1;
  double lo = 0.15166666852310295, hi = 0.6;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (b.evaluate_truth(Eigen::Vector2d(xa(0), mid))(0) > target ? lo : hi) = mid;
  }
  const Eigen::Vector2d xb(xa(0), 0.5 * (lo + hi));
  CHECK(noisy.preference_probability(xa, xb) == doctest::Approx(0.8413447460685429).epsilon(1e-9));

  int ones = 0;
  for (int s = 0; s < n; ++s) ones += noisy.expert_response(xa, xb, s);
  const double p = 0.8413447460685429;
  CHECK(std::abs(ones / double(n) - p) < 3.0 * std::sqrt(p * (1 - p) / n));

  SimulatedOracle sharp(b, Utility::default_linear(1), 0.1, 0.0);
  CHECK(sharp.preference_probability(xa, xb) == 1.0);
}
