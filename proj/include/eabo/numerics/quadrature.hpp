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

#include <vector>

namespace eabo::numerics {

/// Nodes and weights for expectations against N(0, 1): E[g(Z)] ~= sum_i w_i g(z_i).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int order = 0;
};

/// Tensor-product rule for expectations against N(0, I_dim). Node k occupies
/// nodes[k * dim, (k + 1) * dim).
struct TensorQuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  int dim = 0;
  int order = 0;

  int size() const { return static_cast<int>(weights.size()); }
  const double* node(int k) const { return nodes.data() + static_cast<std::size_t>(k) * dim; }
};

inline constexpr int kMaxGaussHermiteOrder = 128;
inline constexpr int kMaxTensorDimension = 4;

/// Probabilists' Gauss-Hermite rule of the given order, 1 <= order <= 128.
QuadratureRule gauss_hermite(int order);

/// Tensor product of gauss_hermite(order) over 1 <= dim <= 4 axes.
TensorQuadratureRule tensor_gauss_hermite(int order, int dim);

/// Gauss-Legendre rule on [-1, 1] (weights sum to 2), 1 <= order <= 128.
QuadratureRule gauss_legendre(int order);

}  // namespace eabo::numerics
