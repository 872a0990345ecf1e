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

#include "eabo/numerics/normal.hpp"

#include <cmath>
#include <numbers>

namespace eabo::numerics {
namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267793994605993438;
constexpr double kTailThreshold = -6.0;

// Lentz-free backward evaluation of the erfc continued fraction, valid for x >~ 3.
double erfcx_continued_fraction(double x) {
  double t = x;
  for (int k = 80; k >= 1; --k) t = x + 0.5 * k / t;
  return 1.0 / (std::sqrt(std::numbers::pi) * t);
}

}  // namespace

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

NormalPdfCdf std_normal_pdf_cdf(double z) { return {normal_pdf(z), normal_cdf(z)}; }

double erfcx(double x) {
  if (x < 4.0) return std::exp(x * x) * std::erfc(x);
  return erfcx_continued_fraction(x);
}

double log_normal_cdf(double t) {
  if (t > 0.0) return std::log1p(-0.5 * std::erfc(t / std::numbers::sqrt2));
  if (t > kTailThreshold) return std::log(normal_cdf(t));
  return std::log(0.5 * erfcx(-t / std::numbers::sqrt2)) - 0.5 * t * t;
}

double mills_ratio(double t) {
  if (t > kTailThreshold) return normal_pdf(t) / normal_cdf(t);
  return 2.0 * kInvSqrt2Pi / erfcx(-t / std::numbers::sqrt2);
}

double mills_ratio_derivative(double t) {
  const double lambda = mills_ratio(t);
  return -lambda * (t + lambda);
}

}  // namespace eabo::numerics
