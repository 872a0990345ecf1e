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

#include "eabo/errors.hpp"
#include "eabo/numerics/optimize.hpp"
#include "eabo/utility.hpp"

using namespace eabo;

namespace {

double Phi(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }
double phi(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); }

// Clark's formula: E[min(A, B)] for independent Gaussians.
double clark_min(double ma, double va, double mb, double vb) {
  const double theta = std::sqrt(va + vb);
  const double alpha = (ma - mb) / theta;
  const double expected_max = ma * Phi(alpha) + mb * Phi(-alpha) + theta * phi(alpha);
  return ma + mb - expected_max;
}

PairMoments random_pair(std::mt19937_64& rng, int m) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  PairMoments p{Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (int j = 0; j < m; ++j) {
    p.mean_a(j) = n(rng);
    p.mean_b(j) = n(rng);
    p.var_a(j) = 0.05 + u(rng);
    p.var_b(j) = 0.05 + u(rng);
    p.cov_ab(j) = (2.0 * u(rng) - 1.0) * 0.9 * std::sqrt(p.var_a(j) * p.var_b(j));
  }
  return p;
}

}  // namespace

TEST_CASE("utility values and subgradients") {
  const Eigen::Vector2d y(0.4, -1.0);
  const Utility lin = Utility::linear(Eigen::Vector2d(0.25, 0.75));
  CHECK(lin.value(y) == doctest::Approx(0.1 - 0.75));
  const Utility cheb = Utility::chebyshev(Eigen::Vector2d(2.0, 1.0));
  CHECK(cheb.value(y) == -1.0);
  double g[2];
  cheb.gradient(y.data(), g);
  CHECK(g[0] == 0.0);
  CHECK(g[1] == 1.0);
  const Eigen::Vector2d tie(0.5, 1.0);
  cheb.gradient(tie.data(), g);
  CHECK(g[0] == 2.0);  // ties go to the lowest index
  CHECK(Utility::default_linear(4).weights().sum() == doctest::Approx(1.0));
  CHECK(Utility::chebyshev(Eigen::VectorXd::Ones(1)).is_linear());
  CHECK_THROWS_AS(Utility::chebyshev(Eigen::Vector2d(1.0, 0.0)), ValidationError);
}

TEST_CASE("expected chebyshev utility matches Clark's formula") {
  std::mt19937_64 rng(51);
  const UtilityQuadrature quad = UtilityQuadrature::for_outputs(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector2d w(0.5 + u(rng), 0.5 + u(rng));
    const Eigen::Vector2d mean(2.0 * u(rng) - 1.0, 2.0 * u(rng) - 1.0);
    const Eigen::Vector2d var(0.01 + 0.5 * u(rng), 0.01 + 0.5 * u(rng));
    const double exact = clark_min(w(0) * mean(0), w(0) * w(0) * var(0), w(1) * mean(1), w(1) * w(1) * var(1));
    const double got = expected_utility(Utility::chebyshev(w), mean, var, quad);
    worst = std::max(worst, std::abs(got - exact) / std::sqrt(w.cwiseAbs2().dot(var)));
  }
  // The kink of min limits a 10-point product rule; error relative to the spread.
  CHECK(worst < 1e-2);

  const Eigen::Vector3d w(0.2, 0.3, 0.5), mean(0.1, -0.4, 2.0), var(0.3, 0.2, 0.1);
  CHECK(expected_utility(Utility::linear(w), mean, var, UtilityQuadrature::for_outputs(3)) ==
        doctest::Approx(w.dot(mean)).epsilon(1e-15));
}

TEST_CASE("expected utility gradient matches central differences") {
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + trial % 2;
    const Utility util = trial % 2 ? Utility::default_chebyshev(m) : Utility::default_linear(m);
    const UtilityQuadrature quad = UtilityQuadrature::for_outputs(m);
    Eigen::VectorXd v(2 * m);
    for (int j = 0; j < m; ++j) {
      v(j) = 2.0 * u(rng) - 1.0;
      v(m + j) = 0.05 + u(rng);
    }
    numerics::ObjectiveWithGradient f = [&](const Eigen::VectorXd& t, Eigen::VectorXd& g) {
      const ExpectedUtility e = expected_utility_with_gradient(util, t.head(m), t.tail(m), quad);
      g.resize(2 * m);
      g << e.d_mean, e.d_variance;
      return e.value;
    };
    CHECK(numerics::finite_difference_check(f, v, 1e-6) < 1e-6);
  }
}

TEST_CASE("delta moments are exact for linear utilities") {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const int m = 1 + trial % 3;
    const PairMoments p = random_pair(rng, m);
    Eigen::VectorXd w = Eigen::VectorXd::LinSpaced(m, 0.2, 1.0);
    const DeltaMoments d = delta_moments(Utility::linear(w), p, UtilityQuadrature::for_outputs(m));
    double var = 0.0;
    for (int j = 0; j < m; ++j) var += w(j) * w(j) * (p.var_a(j) + p.var_b(j) - 2.0 * p.cov_ab(j));
    CHECK(d.mean == doctest::Approx(w.dot(p.mean_a - p.mean_b)).epsilon(1e-14));
    CHECK(d.variance == doctest::Approx(var).epsilon(1e-14));
    CHECK((d.weight_a - w).norm() == 0.0);
    CHECK((d.weight_b - w).norm() == 0.0);
  }
}

TEST_CASE("chebyshev delta moments and Stein weights against Monte Carlo") {
  std::mt19937_64 rng(54);
  std::normal_distribution<double> n(0.0, 1.0);
  constexpr int kSamples = 400000;
  const UtilityQuadrature quad = UtilityQuadrature::for_outputs(2);
  const Utility util = Utility::chebyshev(Eigen::Vector2d(1.0, 0.7));
  for (int trial = 0; trial < 6; ++trial) {
    const PairMoments p = random_pair(rng, 2);
    // An extra point x with known covariances to f(a), f(b).
    CrossCovariance cross{Eigen::Vector2d(0.3, -0.2) * (trial + 1) / 6.0, Eigen::Vector2d(0.1, 0.25)};
    const DeltaMoments d = delta_moments(util, p, quad, {cross});
    // Sample (f(a), f(b)) per output, and f(x) = c^T Sigma^-1 (f - mu) + independent part.
    double s1 = 0.0, s2 = 0.0;
    Eigen::Vector2d sxd = Eigen::Vector2d::Zero();
    for (int s = 0; s < kSamples; ++s) {
      Eigen::Vector2d fa, fb, fx;
      for (int j = 0; j < 2; ++j) {
        Eigen::Matrix2d cov;
        cov << p.var_a(j), p.cov_ab(j), p.cov_ab(j), p.var_b(j);
        const Eigen::Matrix2d l = cov.llt().matrixL();
        const Eigen::Vector2d e = l * Eigen::Vector2d(n(rng), n(rng));
        fa(j) = p.mean_a(j) + e(0);
        fb(j) = p.mean_b(j) + e(1);
        fx(j) = Eigen::Vector2d(cross.with_a(j), cross.with_b(j)).dot(cov.ldlt().solve(e));
      }
      const double delta = util.value(fa) - util.value(fb);
      s1 += delta;
      s2 += delta * delta;
      sxd += fx * delta;
    }
    const double mean = s1 / kSamples;
    const double var = s2 / kSamples - mean * mean;
    const Eigen::Vector2d cov_xd = sxd / kSamples;  // E[f(x)] = 0
    const double se_mean = std::sqrt(var / kSamples);
    INFO("trial " << trial);
    CHECK(std::abs(d.mean - mean) < 4.0 * se_mean);
    // Quadrature bias of the 8-point joint rule dominates the sampling error here.
    CHECK(std::abs(d.variance - var) < 0.03 * var);
    for (int j = 0; j < 2; ++j) CHECK(std::abs(d.cov_with_f[0](j) - cov_xd(j)) < 0.01);
  }
}

TEST_CASE("delta moment gradients match central differences") {
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    const int m = 1 + trial % 2;
    const Utility util = trial % 2 ? Utility::default_chebyshev(m) : Utility::default_linear(m);
    const UtilityQuadrature quad = UtilityQuadrature::for_outputs(m);
    const PairMoments p = random_pair(rng, m);
    auto pack = [m](const PairMoments& q) {
      Eigen::VectorXd v(5 * m);
      v << q.mean_a, q.mean_b, q.var_a, q.var_b, q.cov_ab;
      return v;
    };
    auto unpack = [m](const Eigen::VectorXd& v) {
      return PairMoments{v.segment(0, m), v.segment(m, m), v.segment(2 * m, m), v.segment(3 * m, m),
                         v.segment(4 * m, m)};
    };
    for (int which = 0; which < 2; ++which) {
      numerics::ObjectiveWithGradient f = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
        DeltaMomentsGradient grad;
        const DeltaMoments d = delta_moments_with_gradient(util, unpack(v), quad, grad);
        g = pack(which == 0 ? grad.d_mean : grad.d_variance);
        return which == 0 ? d.mean : d.variance;
      };
      INFO("trial " << trial << " which " << which);
      CHECK(numerics::finite_difference_check(f, pack(p), 1e-6) < 1e-5);
    }
  }
}
