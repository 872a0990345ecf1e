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

#include <atomic>
#include <cstdlib>
#include <string_view>

#include "eabo/simd/se_kernel.hpp"

namespace eabo::simd {
namespace {

Isa detect() {
  if (const char* env = std::getenv("EABO_SIMD"); env != nullptr && std::string_view(env) == "scalar") {
    return Isa::Scalar;
  }
  return cpu_supports(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

std::atomic<Isa>& current() {
  static std::atomic<Isa> isa{detect()};
  return isa;
}

}  // namespace

bool cpu_supports(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(__x86_64__) || defined(_M_X64)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa active_isa() { return current().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  current().store(cpu_supports(isa) ? isa : Isa::Scalar, std::memory_order_relaxed);
}

void se_kernel_row(const double* x, const double* z, int count, int ld, int dim, const double* inv_ls2,
                   double variance, double* out) {
  if (active_isa() == Isa::Avx2) {
    avx2::se_kernel_row(x, z, count, ld, dim, inv_ls2, variance, out);
  } else {
    scalar::se_kernel_row(x, z, count, ld, dim, inv_ls2, variance, out);
  }
}

void exp_batch(const double* in, int count, double* out) {
  if (active_isa() == Isa::Avx2) {
    avx2::exp_batch(in, count, out);
  } else {
    scalar::exp_batch(in, count, out);
  }
}

}  // namespace eabo::simd
