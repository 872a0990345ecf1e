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

#include "eabo/numerics/linalg.hpp"

#include <cmath>
#include <string>

#include "eabo/errors.hpp"

namespace eabo::numerics {

JitteredCholesky cholesky_with_jitter(const Eigen::MatrixXd& matrix, std::span<const double> ladder) {
  if (matrix.rows() != matrix.cols()) throw DimensionMismatch("cholesky_with_jitter: matrix is not square");
  const Eigen::Index n = matrix.rows();
  for (double jitter : ladder) {
    Eigen::MatrixXd shifted = matrix;
    shifted.diagonal().array() += jitter;
    Eigen::LLT<Eigen::MatrixXd> llt(shifted);
    if (llt.info() != Eigen::Success) continue;
    Eigen::MatrixXd lower = llt.matrixL();
    bool ok = true;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(lower(i, i) > 0.0) || !std::isfinite(lower(i, i))) {
        ok = false;
        break;
      }
    }
    if (ok) return {std::move(lower), jitter};
  }
  throw NotPositiveDefinite("cholesky_with_jitter: factorization failed for every jitter level (n=" +
                            std::to_string(n) + ")");
}

Eigen::MatrixXd cholesky_inverse(const Eigen::MatrixXd& lower) {
  const Eigen::Index n = lower.rows();
  Eigen::MatrixXd inv_lower = Eigen::MatrixXd::Identity(n, n);
  lower.triangularView<Eigen::Lower>().solveInPlace(inv_lower);
  return inv_lower.transpose() * inv_lower;
}

double cholesky_log_det(const Eigen::MatrixXd& lower) {
  return 2.0 * lower.diagonal().array().log().sum();
}

}  // namespace eabo::numerics
