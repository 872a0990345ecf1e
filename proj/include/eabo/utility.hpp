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
#include <vector>

#include "eabo/numerics/quadrature.hpp"

namespace eabo {

/// Scalarization U: R^m -> R of the objective vector.
class Utility {
 public:
  enum class Kind { Linear, Chebyshev };

  /// U(y) = w^T y.
  static Utility linear(Eigen::VectorXd weights);
  /// U(y) = min_j w_j y_j, every w_j > 0.
  static Utility chebyshev(Eigen::VectorXd weights);
  /// Equal weights 1/m.
  static Utility default_linear(int outputs);
  /// Unit weights.
  static Utility default_chebyshev(int outputs);

  Kind kind() const { return kind_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  int outputs() const { return static_cast<int>(weights_.size()); }

  /// True when U is affine in y: every linear utility, and Chebyshev with m = 1.
  bool is_linear() const { return kind_ == Kind::Linear || weights_.size() == 1; }

  double value(const Eigen::Ref<const Eigen::VectorXd>& y) const;
  double value(const double* y) const;
  /// A subgradient of U at y; Chebyshev ties go to the lowest index.
  void gradient(const double* y, double* out) const;

 private:
  Utility(Kind kind, Eigen::VectorXd weights) : kind_(kind), weights_(std::move(weights)) {}

  Kind kind_ = Kind::Linear;
  Eigen::VectorXd weights_;
};

/// Quadrature rules used by every Gaussian expectation of U.
struct UtilityQuadrature {
  numerics::TensorQuadratureRule marginal;  ///< m-dimensional, for E[U(f(x))]
  numerics::TensorQuadratureRule joint;     ///< 2m-dimensional, for moments of U(f_a) - U(f_b)

  static constexpr int kMarginalOrder = 10;
  static constexpr int kJointOrder = 8;

  /// Rules for m outputs. The joint rule is only built for m <= 2.
  static UtilityQuadrature for_outputs(int outputs, int marginal_order = kMarginalOrder,
                                       int joint_order = kJointOrder);
};

struct ExpectedUtility {
  double value = 0.0;
  Eigen::VectorXd d_mean;      ///< d value / d mean
  Eigen::VectorXd d_variance;  ///< d value / d variance
};

/// E[U(F)] for F ~ N(mean, diag(variance)). Exact w^T mean for linear U;
/// tensor Gauss-Hermite for Chebyshev.
double expected_utility(const Utility& utility, const Eigen::VectorXd& mean, const Eigen::VectorXd& variance,
                        const UtilityQuadrature& quad);

/// expected_utility together with its derivatives.
ExpectedUtility expected_utility_with_gradient(const Utility& utility, const Eigen::VectorXd& mean,
                                               const Eigen::VectorXd& variance, const UtilityQuadrature& quad);

/// Joint Gaussian moments of (f(x_a), f(x_b)); outputs are independent so
/// only the per-output 2x2 blocks are stored.
struct PairMoments {
  Eigen::VectorXd mean_a, mean_b;
  Eigen::VectorXd var_a, var_b;
  Eigen::VectorXd cov_ab;

  int outputs() const { return static_cast<int>(mean_a.size()); }
};

/// Per-output covariances of f(x) with f(x_a) and f(x_b).
struct CrossCovariance {
  Eigen::VectorXd with_a;
  Eigen::VectorXd with_b;
};

/// Moments of Delta = U(f(x_a)) - U(f(x_b)).
struct DeltaMoments {
  double mean = 0.0;
  double variance = 0.0;
  /// E[grad U(f(x_a))] and E[grad U(f(x_b))]; Cov[f_j(x), Delta] =
  /// K_j(x, a) weight_a_j - K_j(x, b) weight_b_j by Stein's identity.
  Eigen::VectorXd weight_a;
  Eigen::VectorXd weight_b;
  /// Cov[f(x), Delta] for every requested extra point.
  std::vector<Eigen::VectorXd> cov_with_f;

  Eigen::VectorXd covariance_with(const CrossCovariance& cross) const;
};

/// Derivatives of (mean, variance) of Delta with respect to PairMoments.
struct DeltaMomentsGradient {
  PairMoments d_mean;
  PairMoments d_variance;
};

/// Tolerance below which a negative matched variance is treated as round-off.
inline constexpr double kNegativeVarianceTolerance = 1e-10;

/// Exact moments for linear U; Gaussian moment matching by joint quadrature
/// for Chebyshev (m <= 2). Throws NegativeVariance if the matched variance
/// is below -1e-10.
DeltaMoments delta_moments(const Utility& utility, const PairMoments& pair, const UtilityQuadrature& quad,
                           const std::vector<CrossCovariance>& extra_points = {});

/// delta_moments plus derivatives of mean and variance w.r.t. the pair moments.
DeltaMoments delta_moments_with_gradient(const Utility& utility, const PairMoments& pair,
                                         const UtilityQuadrature& quad, DeltaMomentsGradient& gradient);

}  // namespace eabo
