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

#include <cmath>

#include "eabo/simd/se_kernel.hpp"

namespace eabo::simd::scalar {

void se_kernel_row(const double* x, const double* z, int count, int ld, int dim, const double* inv_ls2,
                   double variance, double* out) {
  for (int i = 0; i < count; ++i) {
    double acc = 0.0;
    for (int p = 0; p < dim; ++p) {
      const double diff = x[p] - z[p * ld + i];
      acc += diff * diff * inv_ls2[p];
    }
    out[i] = variance * std::exp(-0.5 * acc);
  }
}

void exp_batch(const double* in, int count, double* out) {
  for (int i = 0; i < count; ++i) out[i] = std::exp(in[i]);
}

}  // namespace eabo::simd::scalar
