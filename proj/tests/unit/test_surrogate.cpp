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

#include <doctest.h>

#include "eabo/surrogate.hpp"
#include "../support/oracles.hpp"

using namespace eabo;

TEST_CASE("elbo gradient matches central differences") {
  const std::vector<double> errors = testing::elbo_gradient_errors(20);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    INFO("trial " << i);
    CHECK(errors[i] < 1e-4);
  }
}

TEST_CASE("comparison likelihood term matches a dense trapezoid") {
  const std::vector<double> errors = testing::comp_term_errors(50);
  for (std::size_t i = 0; i < errors.size(); ++i) {
    INFO("config " << i << " sigma index " << i % 3);
    CHECK(errors[i] < 1e-6);
  }
}

TEST_CASE("expected log probit at closed-form limits") {
  // b = 0 reduces to log Phi(a).
  for (double a : {-20.0, -3.0, -0.5, 0.0, 0.7, 4.0}) {
    CHECK(expected_log_probit(a, 0.0).value == doctest::Approx(testing::log_normal_cdf_reference(a)).epsilon(1e-12));
  }
  // E[log Phi(a + bZ)] is symmetric in the sign of b.
  for (double a : {-2.0, 0.3, 1.5}) {
    CHECK(expected_log_probit(a, 2.0).value == doctest::Approx(expected_log_probit(a, -2.0).value).epsilon(1e-12));
  }
}

TEST_CASE("sparse posterior with inducing points at the data recovers the exact GP mean") {
  const std::vector<double> gaps = testing::sparse_exact_gap(10);
  for (std::size_t i = 0; i < gaps.size(); ++i) {
    INFO("problem " << i);
    CHECK(gaps[i] < 0.05);
  }
}
