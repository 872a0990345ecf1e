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

#include "eabo/utility.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <spdlog/spdlog.h>

#include "eabo/errors.hpp"

namespace eabo {
namespace {

constexpr double kSigmaFloor = 1e-10;

void check_outputs(const Utility& utility, Eigen::Index size, const char* where) {
  if (size != utility.outputs()) {
    throw DimensionMismatch(std::string(where) + ": utility has " + std::to_string(utility.outputs()) +
                            " weights, got a vector of size " + std::to_string(size));
  }
}

const numerics::TensorQuadratureRule& require_rule(const numerics::TensorQuadratureRule& rule, int dim,
                                                   const char* what) {
  if (rule.dim != dim) {
    throw UnsupportedDimension(std::string(what) + " quadrature of dimension " + std::to_string(dim) +
                               " is not available (Chebyshev moments support at most 2 outputs)");
  }
  return rule;
}

// E[grad U(F)] for F ~ N(mean, diag(var)) by the marginal rule.
Eigen::VectorXd expected_gradient(const Utility& utility, const Eigen::VectorXd& mean, const Eigen::VectorXd& var,
                                  const UtilityQuadrature& quad) {
  const int m = utility.outputs();
  if (utility.is_linear()) return utility.weights();
  const auto& rule = require_rule(quad.marginal, m, "marginal");
  const Eigen::VectorXd sigma = var.cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd y(m);
  Eigen::VectorXd g(m);
  for (int k = 0; k < rule.size(); ++k) {
    const double* z = rule.node(k);
    for (int j = 0; j < m; ++j) y(j) = mean(j) + sigma(j) * z[j];
    utility.gradient(y.data(), g.data());
    acc += rule.weights[k] * g;
  }
  return acc;
}

double finalize_variance(double variance) {
  if (variance >= 0.0) return variance;
  if (variance >= -kNegativeVarianceTolerance) {
    spdlog::warn("delta_moments: clipping negative variance {:.3e} to zero", variance);
    return 0.0;
  }
  throw NegativeVariance("delta_moments: matched variance " + std::to_string(variance) + " is negative");
}

PairMoments zero_like(const PairMoments& pair) {
  const auto m = pair.outputs();
  return {Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m),
          Eigen::VectorXd::Zero(m)};
}

struct PairFactor {
  double l11 = 0.0, l21 = 0.0, l22 = 0.0;
  bool l11_active = false, l22_active = false;
};

// Cholesky of [[va, c], [c, vb]] with degenerate directions pinned to zero.
PairFactor factor_pair(double va, double vb, double c) {
  PairFactor f;
  if (va > 1e-300) {
    f.l11 = std::sqrt(va);
    f.l11_active = true;
    f.l21 = c / f.l11;
  }
  const double rest = vb - f.l21 * f.l21;
  if (rest > 1e-12 * std::max(vb, 1e-300)) {
    f.l22 = std::sqrt(rest);
    f.l22_active = true;
  }
  return f;
}

DeltaMoments linear_delta(const Utility& utility, const PairMoments& pair, DeltaMomentsGradient* gradient) {
  const Eigen::VectorXd& w = utility.weights();
  DeltaMoments out;
  out.mean = w.dot(pair.mean_a - pair.mean_b);
  const Eigen::VectorXd w2 = w.cwiseProduct(w);
  out.variance = finalize_variance(w2.dot(pair.var_a + pair.var_b - 2.0 * pair.cov_ab));
  out.weight_a = w;
  out.weight_b = w;
  if (gradient != nullptr) {
    gradient->d_mean = zero_like(pair);
    gradient->d_variance = zero_like(pair);
    gradient->d_mean.mean_a = w;
    gradient->d_mean.mean_b = -w;
    gradient->d_variance.var_a = w2;
    gradient->d_variance.var_b = w2;
    gradient->d_variance.cov_ab = -2.0 * w2;
  }
  return out;
}

DeltaMoments chebyshev_delta(const Utility& utility, const PairMoments& pair, const UtilityQuadrature& quad,
                             DeltaMomentsGradient* gradient) {
  const int m = utility.outputs();
  const auto& rule = require_rule(quad.joint, 2 * m, "joint");
  std::vector<PairFactor> factors(m);
  for (int j = 0; j < m; ++j) factors[j] = factor_pair(pair.var_a(j), pair.var_b(j), pair.cov_ab(j));

  const int n = rule.size();
  std::vector<double> delta(n);
  Eigen::VectorXd fa(m), fb(m);
  double mean = 0.0;
  for (int k = 0; k < n; ++k) {
    const double* z = rule.node(k);
    for (int j = 0; j < m; ++j) {
      const auto& f = factors[j];
      fa(j) = pair.mean_a(j) + f.l11 * z[2 * j];
      fb(j) = pair.mean_b(j) + f.l21 * z[2 * j] + f.l22 * z[2 * j + 1];
    }
    delta[k] = utility.value(fa.data()) - utility.value(fb.data());
    mean += rule.weights[k] * delta[k];
  }
  double variance = 0.0;
  for (int k = 0; k < n; ++k) variance += rule.weights[k] * (delta[k] - mean) * (delta[k] - mean);

  DeltaMoments out;
  out.mean = mean;
  out.variance = finalize_variance(variance);
  out.weight_a = expected_gradient(utility, pair.mean_a, pair.var_a, quad);
  out.weight_b = expected_gradient(utility, pair.mean_b, pair.var_b, quad);

  if (gradient != nullptr) {
    // Accumulate derivatives w.r.t. (mean_a, mean_b, l11, l21, l22) per output.
    Eigen::VectorXd dm_ma = Eigen::VectorXd::Zero(m), dm_mb = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd dm_l11 = Eigen::VectorXd::Zero(m), dm_l21 = Eigen::VectorXd::Zero(m),
                    dm_l22 = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd dv_ma = Eigen::VectorXd::Zero(m), dv_mb = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd dv_l11 = Eigen::VectorXd::Zero(m), dv_l21 = Eigen::VectorXd::Zero(m),
                    dv_l22 = Eigen::VectorXd::Zero(m);
    Eigen::VectorXd ga(m), gb(m);
    for (int k = 0; k < n; ++k) {
      const double* z = rule.node(k);
      for (int j = 0; j < m; ++j) {
        const auto& f = factors[j];
        fa(j) = pair.mean_a(j) + f.l11 * z[2 * j];
        fb(j) = pair.mean_b(j) + f.l21 * z[2 * j] + f.l22 * z[2 * j + 1];
      }
      utility.gradient(fa.data(), ga.data());
      utility.gradient(fb.data(), gb.data());
      const double w = rule.weights[k];
      const double wc = 2.0 * w * (delta[k] - mean);
      for (int j = 0; j < m; ++j) {
        const double z1 = z[2 * j];
        const double z2 = z[2 * j + 1];
        dm_ma(j) += w * ga(j);
        dm_mb(j) -= w * gb(j);
        dm_l11(j) += w * ga(j) * z1;
        dm_l21(j) -= w * gb(j) * z1;
        dm_l22(j) -= w * gb(j) * z2;
        dv_ma(j) += wc * ga(j);
        dv_mb(j) -= wc * gb(j);
        dv_l11(j) += wc * ga(j) * z1;
        dv_l21(j) -= wc * gb(j) * z1;
        dv_l22(j) -= wc * gb(j) * z2;
      }
    }
    gradient->d_mean = zero_like(pair);
    gradient->d_variance = zero_like(pair);
    auto chain = [&](PairMoments& target, const Eigen::VectorXd& d_ma, const Eigen::VectorXd& d_mb,
                     const Eigen::VectorXd& d_l11, const Eigen::VectorXd& d_l21, const Eigen::VectorXd& d_l22) {
      target.mean_a = d_ma;
      target.mean_b = d_mb;
      for (int j = 0; j < m; ++j) {
        const auto& f = factors[j];
        double d21 = d_l21(j);
        if (f.l22_active) {
          // l22 = sqrt(vb - l21^2)
          target.var_b(j) += d_l22(j) / (2.0 * f.l22);
          d21 += d_l22(j) * (-f.l21 / f.l22);
        }
        if (f.l11_active) {
          // l11 = sqrt(va), l21 = c / l11
          target.var_a(j) += d_l11(j) / (2.0 * f.l11);
          target.cov_ab(j) += d21 / f.l11;
          target.var_a(j) += d21 * (-f.l21 / (2.0 * pair.var_a(j)));
        }
      }
    };
    chain(gradient->d_mean, dm_ma, dm_mb, dm_l11, dm_l21, dm_l22);
    chain(gradient->d_variance, dv_ma, dv_mb, dv_l11, dv_l21, dv_l22);
  }
  return out;
}

}  // namespace

Utility Utility::linear(Eigen::VectorXd weights) {
  if (weights.size() < 1) throw DimensionMismatch("linear utility needs at least one weight");
  if (!weights.allFinite()) throw ValidationError("utility.weights", "weights must be finite");
  return Utility(Kind::Linear, std::move(weights));
}

Utility Utility::chebyshev(Eigen::VectorXd weights) {
  if (weights.size() < 1) throw DimensionMismatch("Chebyshev utility needs at least one weight");
  if (!weights.allFinite() || (weights.array() <= 0.0).any()) {
    throw ValidationError("utility.weights", "Chebyshev weights must be finite and strictly positive");
  }
  return Utility(Kind::Chebyshev, std::move(weights));
}

Utility Utility::default_linear(int outputs) {
  return linear(Eigen::VectorXd::Constant(outputs, 1.0 / outputs));
}

Utility Utility::default_chebyshev(int outputs) { return chebyshev(Eigen::VectorXd::Ones(outputs)); }

double Utility::value(const Eigen::Ref<const Eigen::VectorXd>& y) const {
  check_outputs(*this, y.size(), "utility_value");
  return value(y.data());
}

double Utility::value(const double* y) const {
  const Eigen::Index m = weights_.size();
  if (kind_ == Kind::Linear) {
    double acc = 0.0;
    for (Eigen::Index j = 0; j < m; ++j) acc += weights_(j) * y[j];
    return acc;
  }
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < m; ++j) best = std::min(best, weights_(j) * y[j]);
  return best;
}

void Utility::gradient(const double* y, double* out) const {
  const Eigen::Index m = weights_.size();
  if (kind_ == Kind::Linear) {
    for (Eigen::Index j = 0; j < m; ++j) out[j] = weights_(j);
    return;
  }
  Eigen::Index arg = 0;
  double best = weights_(0) * y[0];
  for (Eigen::Index j = 1; j < m; ++j) {
    if (weights_(j) * y[j] < best) {
      best = weights_(j) * y[j];
      arg = j;
    }
  }
  for (Eigen::Index j = 0; j < m; ++j) out[j] = (j == arg) ? weights_(j) : 0.0;
}

UtilityQuadrature UtilityQuadrature::for_outputs(int outputs, int marginal_order, int joint_order) {
  UtilityQuadrature quad;
  if (outputs <= numerics::kMaxTensorDimension) quad.marginal = numerics::tensor_gauss_hermite(marginal_order, outputs);
  if (2 * outputs <= numerics::kMaxTensorDimension) quad.joint = numerics::tensor_gauss_hermite(joint_order, 2 * outputs);
  return quad;
}

double expected_utility(const Utility& utility, const Eigen::VectorXd& mean, const Eigen::VectorXd& variance,
                        const UtilityQuadrature& quad) {
  check_outputs(utility, mean.size(), "expected_utility");
  check_outputs(utility, variance.size(), "expected_utility");
  if (utility.is_linear()) return utility.weights().dot(mean);
  const int m = utility.outputs();
  const auto& rule = require_rule(quad.marginal, m, "marginal");
  const Eigen::VectorXd sigma = variance.cwiseMax(0.0).cwiseSqrt();
  Eigen::VectorXd y(m);
  double acc = 0.0;
  for (int k = 0; k < rule.size(); ++k) {
    const double* z = rule.node(k);
    for (int j = 0; j < m; ++j) y(j) = mean(j) + sigma(j) * z[j];
    acc += rule.weights[k] * utility.value(y.data());
  }
  return acc;
}

ExpectedUtility expected_utility_with_gradient(const Utility& utility, const Eigen::VectorXd& mean,
                                               const Eigen::VectorXd& variance, const UtilityQuadrature& quad) {
  check_outputs(utility, mean.size(), "expected_utility");
  check_outputs(utility, variance.size(), "expected_utility");
  const int m = utility.outputs();
  ExpectedUtility out;
  out.d_variance = Eigen::VectorXd::Zero(m);
  if (utility.is_linear()) {
    out.value = utility.weights().dot(mean);
    out.d_mean = utility.weights();
    return out;
  }
  const auto& rule = require_rule(quad.marginal, m, "marginal");
  const Eigen::VectorXd sigma = variance.cwiseMax(0.0).cwiseSqrt();
  out.d_mean = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd d_sigma = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd y(m), g(m);
  for (int k = 0; k < rule.size(); ++k) {
    const double* z = rule.node(k);
    for (int j = 0; j < m; ++j) y(j) = mean(j) + sigma(j) * z[j];
    const double w = rule.weights[k];
    out.value += w * utility.value(y.data());
    utility.gradient(y.data(), g.data());
    out.d_mean += w * g;
    for (int j = 0; j < m; ++j) d_sigma(j) += w * g(j) * z[j];
  }
  for (int j = 0; j < m; ++j) out.d_variance(j) = d_sigma(j) / (2.0 * std::max(sigma(j), kSigmaFloor));
  return out;
}

Eigen::VectorXd DeltaMoments::covariance_with(const CrossCovariance& cross) const {
  return cross.with_a.cwiseProduct(weight_a) - cross.with_b.cwiseProduct(weight_b);
}

DeltaMoments delta_moments(const Utility& utility, const PairMoments& pair, const UtilityQuadrature& quad,
                           const std::vector<CrossCovariance>& extra_points) {
  check_outputs(utility, pair.outputs(), "delta_moments");
  DeltaMoments out = utility.is_linear() ? linear_delta(utility, pair, nullptr)
                                         : chebyshev_delta(utility, pair, quad, nullptr);
  out.cov_with_f.reserve(extra_points.size());
  for (const auto& cross : extra_points) {
    check_outputs(utility, cross.with_a.size(), "delta_moments");
    out.cov_with_f.push_back(out.covariance_with(cross));
  }
  return out;
}

DeltaMoments delta_moments_with_gradient(const Utility& utility, const PairMoments& pair,
                                         const UtilityQuadrature& quad, DeltaMomentsGradient& gradient) {
  check_outputs(utility, pair.outputs(), "delta_moments");
  return utility.is_linear() ? linear_delta(utility, pair, &gradient)
                             : chebyshev_delta(utility, pair, quad, &gradient);
}

}  // namespace eabo
