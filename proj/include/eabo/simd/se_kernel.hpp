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

#include <string_view>

// Data-parallel inner loop of the ARD squared-exponential kernel.
//
// out[i] = variance * exp(-0.5 * sum_p (x[p] - z[p * ld + i])^2 * inv_ls2[p]),  0 <= i < count
//
// `z` is column-major: coordinate p of point i lives at z[p * ld + i], so the
// loop over i is contiguous. The scalar version is the reference; the AVX2
// version is selected at runtime and must agree with it to ~1e-15 relative,
// scaled by the magnitude of the exponent.

namespace eabo::simd {

enum class Isa { Scalar, Avx2 };

/// ISA used by the dispatching entry points. Defaults to the best one the CPU
/// supports; the environment variable EABO_SIMD=scalar forces the reference.
Isa active_isa();
void set_active_isa(Isa isa);
bool cpu_supports(Isa isa);
std::string_view isa_name(Isa isa);

void se_kernel_row(const double* x, const double* z, int count, int ld, int dim, const double* inv_ls2,
                   double variance, double* out);

/// out[i] = exp(in[i]). The AVX2 path returns 0 where the result would be subnormal.
void exp_batch(const double* in, int count, double* out);

namespace scalar {
void se_kernel_row(const double* x, const double* z, int count, int ld, int dim, const double* inv_ls2,
                   double variance, double* out);
void exp_batch(const double* in, int count, double* out);
}  // namespace scalar

namespace avx2 {
void se_kernel_row(const double* x, const double* z, int count, int ld, int dim, const double* inv_ls2,
                   double variance, double* out);
void exp_batch(const double* in, int count, double* out);
}  // namespace avx2

}  // namespace eabo::simd
