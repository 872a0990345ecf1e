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

namespace eabo::numerics {

inline constexpr int kMaxSobolDimension = 21;

/// The first `count` points of a `dim`-dimensional Sobol sequence (Gray-code
/// order, Joe-Kuo direction numbers), one point per row. When `scrambled`,
/// a random digital shift derived from `seed` is XOR-ed into every point;
/// the shifted set keeps the net structure of the original.
Eigen::MatrixXd sobol_points(int count, int dim, std::uint64_t seed, bool scrambled = true);

}  // namespace eabo::numerics
