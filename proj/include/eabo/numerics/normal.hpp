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

namespace eabo::numerics {

struct NormalPdfCdf {
  double pdf;
  double cdf;
};

/// Standard normal density and distribution function at z.
NormalPdfCdf std_normal_pdf_cdf(double z);

double normal_pdf(double z);
double normal_cdf(double z);

/// Scaled complementary error function exp(x^2) * erfc(x).
double erfcx(double x);

/// log Phi(t), accurate far into the lower tail.
double log_normal_cdf(double t);

/// phi(t) / Phi(t). Switches to a continued-fraction branch for t <= -6
/// where Phi underflows relative to phi.
double mills_ratio(double t);

/// Derivative of mills_ratio: -lambda(t) * (t + lambda(t)).
double mills_ratio_derivative(double t);

}  // namespace eabo::numerics
