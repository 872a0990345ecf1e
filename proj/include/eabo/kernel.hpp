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

namespace eabo {

/// ARD squared-exponential hyperparameters for m independent outputs over d
/// inputs, stored on the log scale.
struct KernelHyperparams {
  Eigen::MatrixXd log_lengthscales;  ///< m x d, log l_{j,p} in unit-box units
  Eigen::VectorXd log_outputscales;  ///< m, log sigma_j^2

  static KernelHyperparams constant(int outputs, int dim, double lengthscale, double outputscale);

  int outputs() const { return static_cast<int>(log_outputscales.size()); }
  int dim() const { return static_cast<int>(log_lengthscales.cols()); }
  double lengthscale(int output, int p) const;
  double outputscale(int output) const;

  /// Throws DimensionMismatch / ValidationError on inconsistent shapes or
  /// non-finite entries.
  void validate() const;
};

/// Kernel of a single output, k(x, x') = s2 * exp(-0.5 * sum_p (x_p - x'_p)^2 / l_p^2).
class SeKernel {
 public:
  SeKernel() = default;
  SeKernel(const KernelHyperparams& params, int output);

  int dim() const { return static_cast<int>(inv_ls2_.size()); }
  double variance() const { return variance_; }
  const Eigen::VectorXd& inv_sq_lengthscales() const { return inv_ls2_; }

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b) const;

  /// k(x, points.row(i)) for every row of `points` (n x d, column-major).
  Eigen::VectorXd row(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::MatrixXd& points) const;

  /// J(i, p) = d k(x, points.row(i)) / d x_p, given the precomputed `row`.
  Eigen::MatrixXd row_jacobian(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::MatrixXd& points,
                               const Eigen::VectorXd& row) const;

  Eigen::MatrixXd matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const;

 private:
  Eigen::VectorXd inv_ls2_;
  double variance_ = 1.0;
};

/// Cross-covariance block k_j(X, X') between the rows of X (n x d) and X' (n' x d).
Eigen::MatrixXd kernel_matrix(const KernelHyperparams& params, int output, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& x_prime);

struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;

  double log_density(double value) const;
  /// d log_density(exp(t)) / dt at t = log(value).
  double d_log_density_d_log(double value) const;
};

/// Gamma hyperpriors on lengthscales, output-scales and noise standard deviations.
struct HyperPrior {
  GammaPrior lengthscale{3.0, 6.0};
  GammaPrior outputscale{2.0, 0.15};
  GammaPrior noise{1.1, 0.05};
};

/// Sum of Gamma log-densities over every lengthscale, output-scale and noise
/// standard deviation.
double log_hyperprior(const KernelHyperparams& params, const Eigen::VectorXd& noise_eval_std, double noise_comp_std,
                      const HyperPrior& prior);

}  // namespace eabo
