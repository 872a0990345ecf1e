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
#include <cstdint>

#include "eabo/simd/se_kernel.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#include <immintrin.h>
#define EABO_HAVE_X86 1
#else
#define EABO_HAVE_X86 0
#endif

namespace eabo::simd::avx2 {

#if EABO_HAVE_X86

namespace {

#define EABO_AVX2 __attribute__((target("avx2,fma")))

// Cephes-style exp: Cody-Waite reduction then a (3,4) rational approximation.
EABO_AVX2 inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.3964);  // exp(lo) just above DBL_MIN
  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(n, c1, x);
  x = _mm256_fnmadd_pd(n, c2, x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(1.26177193074810590878e-4);
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(3.02994407707441961300e-2));
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(9.99999999999999999910e-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(3.00198505138664455042e-6);
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.52448340349684104192e-3));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.27265548208155028766e-1));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.00000000000000000009e0));
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));

  // Scale by 2^n through the exponent field.
  const __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  const __m256d scale = _mm256_castsi256_pd(_mm256_slli_epi64(n64, 52));
  r = _mm256_mul_pd(r, scale);
  return _mm256_blendv_pd(r, _mm256_setzero_pd(), underflow);
}

}  // namespace

EABO_AVX2 void se_kernel_row(const double* x, const double* z, int count, int ld, int dim, const double* inv_ls2,
                             double variance, double* out) {
  const __m256d half = _mm256_set1_pd(-0.5);
  const __m256d var = _mm256_set1_pd(variance);
  int i = 0;
  for (; i + 4 <= count; i += 4) {
    __m256d acc = _mm256_setzero_pd();
    for (int p = 0; p < dim; ++p) {
      const __m256d diff = _mm256_sub_pd(_mm256_set1_pd(x[p]), _mm256_loadu_pd(z + p * ld + i));
      acc = _mm256_fmadd_pd(_mm256_mul_pd(diff, diff), _mm256_set1_pd(inv_ls2[p]), acc);
    }
    _mm256_storeu_pd(out + i, _mm256_mul_pd(var, exp_pd(_mm256_mul_pd(half, acc))));
  }
  if (i < count) scalar::se_kernel_row(x, z + i, count - i, ld, dim, inv_ls2, variance, out + i);
}

EABO_AVX2 void exp_batch(const double* in, int count, double* out) {
  int i = 0;
  for (; i + 4 <= count; i += 4) _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(in + i)));
  for (; i < count; ++i) {
    double lane[4] = {in[i], 0.0, 0.0, 0.0};
    _mm256_storeu_pd(lane, exp_pd(_mm256_loadu_pd(lane)));
    out[i] = lane[0];
  }
}

#else

void se_kernel_row(const double* x, const double* z, int count, int ld, int dim, const double* inv_ls2,
                   double variance, double* out) {
  scalar::se_kernel_row(x, z, count, ld, dim, inv_ls2, variance, out);
}

void exp_batch(const double* in, int count, double* out) { scalar::exp_batch(in, count, out); }

#endif

}  // namespace eabo::simd::avx2
