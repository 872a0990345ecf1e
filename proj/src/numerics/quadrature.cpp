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

#include "eabo/numerics/quadrature.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "eabo/errors.hpp"

namespace eabo::numerics {
namespace {

// Orthonormal probabilists' Hermite values h_0..h_{n-1} at x, returning
// sum of squares and (via out-params) h_n and h_{n-1} for Newton steps.
struct HermiteEval {
  double sum_squares;
  double h_n;
  double h_nm1;
};

HermiteEval orthonormal_hermite(int n, double x) {
  double prev = 0.0;
  double cur = 1.0;
  double sum = 1.0;
  for (int k = 1; k < n; ++k) {
    const double next = (x * cur - std::sqrt(static_cast<double>(k - 1)) * prev) / std::sqrt(static_cast<double>(k));
    prev = cur;
    cur = next;
    sum += cur * cur;
  }
  const double h_n = (x * cur - std::sqrt(static_cast<double>(n - 1)) * prev) / std::sqrt(static_cast<double>(n));
  return {sum, h_n, cur};
}

}  // namespace

QuadratureRule gauss_hermite(int order) {
  if (order < 1 || order > kMaxGaussHermiteOrder) {
    throw UnsupportedOrder("gauss_hermite: order " + std::to_string(order) + " outside [1, 128]");
  }
  QuadratureRule rule;
  rule.order = order;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  if (order == 1) {
    rule.nodes[0] = 0.0;
    rule.weights[0] = 1.0;
    return rule;
  }

  // Golub-Welsch for starting values.
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(order, order);
  for (int k = 1; k < order; ++k) {
    jacobi(k, k - 1) = std::sqrt(static_cast<double>(k));
    jacobi(k - 1, k) = jacobi(k, k - 1);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  const Eigen::VectorXd& roots = eig.eigenvalues();

  for (int i = 0; i < order; ++i) {
    double x = roots(i);
    // Newton polish on the orthonormal recurrence: h_n'(x) = sqrt(n) h_{n-1}(x).
    for (int it = 0; it < 4; ++it) {
      const HermiteEval e = orthonormal_hermite(order, x);
      const double deriv = std::sqrt(static_cast<double>(order)) * e.h_nm1;
      if (deriv == 0.0) break;
      const double step = e.h_n / deriv;
      x -= step;
      if (std::abs(step) < 1e-16 * (1.0 + std::abs(x))) break;
    }
    rule.nodes[i] = x;
    rule.weights[i] = 1.0 / orthonormal_hermite(order, x).sum_squares;
  }
  // Enforce exact symmetry of the rule.
  for (int i = 0; i < order / 2; ++i) {
    const int j = order - 1 - i;
    const double node = 0.5 * (rule.nodes[j] - rule.nodes[i]);
    const double weight = 0.5 * (rule.weights[i] + rule.weights[j]);
    rule.nodes[i] = -node;
    rule.nodes[j] = node;
    rule.weights[i] = rule.weights[j] = weight;
  }
  if (order % 2 == 1) rule.nodes[order / 2] = 0.0;
  return rule;
}

TensorQuadratureRule tensor_gauss_hermite(int order, int dim) {
  if (dim < 1 || dim > kMaxTensorDimension) {
    throw UnsupportedDimension("tensor_gauss_hermite: dimension " + std::to_string(dim) + " outside [1, 4]");
  }
  const QuadratureRule base = gauss_hermite(order);
  TensorQuadratureRule rule;
  rule.dim = dim;
  rule.order = order;
  int total = 1;
  for (int k = 0; k < dim; ++k) total *= order;
  rule.nodes.resize(static_cast<std::size_t>(total) * dim);
  rule.weights.resize(total);
  for (int flat = 0; flat < total; ++flat) {
    int rest = flat;
    double w = 1.0;
    for (int k = 0; k < dim; ++k) {
      const int idx = rest % order;
      rest /= order;
      rule.nodes[static_cast<std::size_t>(flat) * dim + k] = base.nodes[idx];
      w *= base.weights[idx];
    }
    rule.weights[flat] = w;
  }
  return rule;
}

QuadratureRule gauss_legendre(int order) {
  if (order < 1 || order > kMaxGaussHermiteOrder) {
    throw UnsupportedOrder("gauss_legendre: order " + std::to_string(order) + " outside [1, 128]");
  }
  QuadratureRule rule;
  rule.order = order;
  rule.nodes.resize(order);
  rule.weights.resize(order);
  const double pi = std::acos(-1.0);
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(pi * (i + 0.75) / (order + 0.5));
    double deriv = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= order; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (order == 1) p0 = 1.0;
      deriv = order * (x * p1 - p0) / (x * x - 1.0);
      const double step = p1 / deriv;
      x -= step;
      if (std::abs(step) < 1e-16) break;
    }
    if (order == 1) {
      x = 0.0;
      deriv = 1.0;
    }
    const double weight = 2.0 / ((1.0 - x * x) * deriv * deriv);
    rule.nodes[i] = -x;
    rule.nodes[order - 1 - i] = x;
    rule.weights[i] = rule.weights[order - 1 - i] = weight;
  }
  return rule;
}

}  // namespace eabo::numerics
