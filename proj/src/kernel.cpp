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

#include "eabo/kernel.hpp"

#include <cmath>
#include <string>

#include "eabo/errors.hpp"
#include "eabo/simd/se_kernel.hpp"

namespace eabo {

KernelHyperparams KernelHyperparams::constant(int outputs, int dim, double lengthscale, double outputscale) {
  KernelHyperparams params;
  params.log_lengthscales = Eigen::MatrixXd::Constant(outputs, dim, std::log(lengthscale));
  params.log_outputscales = Eigen::VectorXd::Constant(outputs, std::log(outputscale));
  return params;
}

double KernelHyperparams::lengthscale(int output, int p) const { return std::exp(log_lengthscales(output, p)); }

double KernelHyperparams::outputscale(int output) const { return std::exp(log_outputscales(output)); }

void KernelHyperparams::validate() const {
  if (log_lengthscales.rows() != log_outputscales.size()) {
    throw DimensionMismatch("kernel hyperparameters: " + std::to_string(log_lengthscales.rows()) +
                            " lengthscale rows for " + std::to_string(log_outputscales.size()) + " outputs");
  }
  if (outputs() < 1 || dim() < 1) throw DimensionMismatch("kernel hyperparameters: empty");
  if (!log_lengthscales.allFinite() || !log_outputscales.allFinite()) {
    throw ValidationError("kernel", "non-finite hyperparameter");
  }
}

SeKernel::SeKernel(const KernelHyperparams& params, int output)
    : inv_ls2_((-2.0 * params.log_lengthscales.row(output).transpose()).array().exp()),
      variance_(std::exp(params.log_outputscales(output))) {}

double SeKernel::operator()(const Eigen::Ref<const Eigen::VectorXd>& a,
                            const Eigen::Ref<const Eigen::VectorXd>& b) const {
  if (a.size() != dim() || b.size() != dim()) throw DimensionMismatch("SeKernel: point dimension mismatch");
  const double acc = ((a - b).array().square() * inv_ls2_.array()).sum();
  return variance_ * std::exp(-0.5 * acc);
}

Eigen::VectorXd SeKernel::row(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::MatrixXd& points) const {
  if (x.size() != dim() || points.cols() != dim()) throw DimensionMismatch("SeKernel::row: dimension mismatch");
  Eigen::VectorXd out(points.rows());
  if (points.rows() > 0) {
    simd::se_kernel_row(x.data(), points.data(), static_cast<int>(points.rows()), static_cast<int>(points.rows()),
                        dim(), inv_ls2_.data(), variance_, out.data());
  }
  return out;
}

Eigen::MatrixXd SeKernel::row_jacobian(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::MatrixXd& points,
                                       const Eigen::VectorXd& row) const {
  Eigen::MatrixXd jac(points.rows(), dim());
  for (int p = 0; p < dim(); ++p) {
    jac.col(p) = -(row.array() * (x(p) - points.col(p).array()) * inv_ls2_(p));
  }
  return jac;
}

Eigen::MatrixXd SeKernel::matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) const {
  if (a.cols() != dim() || b.cols() != dim()) throw DimensionMismatch("SeKernel::matrix: dimension mismatch");
  Eigen::MatrixXd out(a.rows(), b.rows());
  Eigen::VectorXd x(dim());
  // Column j of the result is k(b_j, a_i) over i.
  for (Eigen::Index j = 0; j < b.rows(); ++j) {
    x = b.row(j).transpose();
    if (a.rows() > 0) {
      simd::se_kernel_row(x.data(), a.data(), static_cast<int>(a.rows()), static_cast<int>(a.rows()), dim(),
                          inv_ls2_.data(), variance_, out.col(j).data());
    }
  }
  return out;
}

Eigen::MatrixXd kernel_matrix(const KernelHyperparams& params, int output, const Eigen::MatrixXd& x,
                              const Eigen::MatrixXd& x_prime) {
  params.validate();
  if (output < 0 || output >= params.outputs()) throw DimensionMismatch("kernel_matrix: output index out of range");
  if (x.cols() != params.dim() || x_prime.cols() != params.dim()) {
    throw DimensionMismatch("kernel_matrix: points have " + std::to_string(x.cols()) + "/" +
                            std::to_string(x_prime.cols()) + " columns, kernel expects " +
                            std::to_string(params.dim()));
  }
  return SeKernel(params, output).matrix(x, x_prime);
}

double GammaPrior::log_density(double value) const {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(value) - rate * value;
}

double GammaPrior::d_log_density_d_log(double value) const { return (shape - 1.0) - rate * value; }

double log_hyperprior(const KernelHyperparams& params, const Eigen::VectorXd& noise_eval_std, double noise_comp_std,
                      const HyperPrior& prior) {
  double total = 0.0;
  for (int j = 0; j < params.outputs(); ++j) {
    for (int p = 0; p < params.dim(); ++p) total += prior.lengthscale.log_density(params.lengthscale(j, p));
    total += prior.outputscale.log_density(params.outputscale(j));
  }
  for (Eigen::Index j = 0; j < noise_eval_std.size(); ++j) total += prior.noise.log_density(noise_eval_std(j));
  total += prior.noise.log_density(noise_comp_std);
  return total;
}

}  // namespace eabo
