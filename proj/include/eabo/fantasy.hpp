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
#include <vector>

#include "eabo/surrogate.hpp"
#include "eabo/utility.hpp"

namespace eabo {

/// Posterior mean after observing y at x_cand:
/// mu(x) + K(x, x_cand) [K(x_cand, x_cand) + Sigma_eval]^-1 (y - mu(x_cand)), per output.
Eigen::VectorXd fantasy_eval_mean(const Posterior& post, const Eigen::VectorXd& x_cand, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& x);

/// Posterior variance at x after observing any y at x_cand.
Eigen::VectorXd fantasy_eval_variance(const Posterior& post, const Eigen::VectorXd& x_cand, const Eigen::VectorXd& x);

/// Quantities of a pending comparison (x_a, x_b) shared by both outcomes.
struct ComparisonUpdate {
  DeltaMoments delta;
  double nu = 0.0;   ///< sqrt(var_Delta + 2 sigma_comp^2)
  double tau = 0.0;  ///< mean_Delta / nu

  /// P(d = 1) = Phi(tau).
  double probability(int d) const;
  /// Mean innovation weight: +lambda(tau) / nu for d = 1, -lambda(-tau) / nu for d = 0.
  double mean_coefficient(int d) const;
  /// Variance reduction weight lambda (lambda + t) / nu^2 with t = +-tau.
  double variance_coefficient(int d) const;
  /// Cov[f(x), Delta] from per-output posterior covariances of f(x) with f(x_a), f(x_b).
  Eigen::VectorXd gamma(const CrossCovariance& cross) const { return delta.covariance_with(cross); }
};

/// Throws DegenerateNu if nu is zero.
ComparisonUpdate comparison_update(const Posterior& post, const PointFeatures& a, const PointFeatures& b,
                                   const Utility& utility, const UtilityQuadrature& quad);

/// Posterior covariances of f(x) with f(x_a) and f(x_b).
CrossCovariance cross_covariance(const Posterior& post, const PointFeatures& x, const PointFeatures& a,
                                 const PointFeatures& b);

/// Mean of f(x) given the outcome d of comparing x_a with x_b.
Eigen::VectorXd fantasy_comp_mean(const Posterior& post, const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b,
                                  int d, const Utility& utility, const Eigen::VectorXd& x,
                                  const UtilityQuadrature& quad);

/// Per-output covariance over `queries` (rows) given the outcome d:
/// Sigma_j - c gamma_j gamma_j^T, with eigenvalues floored at zero.
std::vector<Eigen::MatrixXd> fantasy_comp_covariance(const Posterior& post, const Eigen::VectorXd& x_a,
                                                     const Eigen::VectorXd& x_b, int d, const Utility& utility,
                                                     const Eigen::MatrixXd& queries, const UtilityQuadrature& quad);

/// Standard-normal variates of a set of pathwise fantasy draws.
struct MatheronDraws {
  /// inducing[s][j]: M variates for u_j = m_u + L_u eps.
  std::vector<std::vector<Eigen::VectorXd>> inducing;
  /// residual(s, j): variate of the part of y_j not explained by u_j.
  Eigen::MatrixXd residual;

  int count() const { return static_cast<int>(inducing.size()); }
  static MatheronDraws generate(int count, int inducing_points, int outputs, std::uint64_t seed);
};

/// y_j = mu_j(x) + t_j^T eps_u + sqrt(Q_j(x) + s_j^2) eps, where
/// t_j = L_u^T K_ZZ^-1 k_j(Z, x) and Q_j is the prior conditional variance
/// given u. This is the pathwise (Matheron) update of a joint prior draw of
/// (f(x), f(Z)) and has the exact predictive distribution of y at x.
Eigen::VectorXd matheron_observation(const Posterior& post, const PointFeatures& x, const MatheronDraws& draws,
                                     int draw);

struct MatheronSample {
  Eigen::VectorXd y;             ///< sampled observation at x_cand
  Eigen::MatrixXd fantasy_mean;  ///< rows: queries, cols: outputs
};

/// One pathwise fantasy draw at x_cand (deterministic per seed) and the
/// conditioned mean at every query row.
MatheronSample matheron_fantasy_sample(const Posterior& post, const Eigen::VectorXd& x_cand, std::uint64_t seed,
                                       const Eigen::MatrixXd& queries);

}  // namespace eabo
