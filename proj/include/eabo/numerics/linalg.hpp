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
#include <span>
#include <vector>

namespace eabo::numerics {

/// Jitter values tried in order by cholesky_with_jitter.
inline const std::vector<double>& default_jitter_ladder() {
  static const std::vector<double> ladder{0.0, 1e-8, 1e-6, 1e-4};
  return ladder;
}

struct JitteredCholesky {
  Eigen::MatrixXd lower;  ///< L with L L^T = A + jitter * I
  double jitter = 0.0;
};

/// Factor `matrix + j I` for the first j in `ladder` that succeeds.
/// Throws NotPositiveDefinite when every entry fails.
JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& matrix,
                                      std::span<const double> ladder = default_jitter_ladder());

/// Inverse of a symmetric positive definite matrix from its lower Cholesky factor.
Eigen::MatrixXd cholesky_inverse(const Eigen::MatrixXd& lower);

/// log|A| from the lower Cholesky factor of A.
double cholesky_log_det(const Eigen::MatrixXd& lower);

}  // namespace eabo::numerics
