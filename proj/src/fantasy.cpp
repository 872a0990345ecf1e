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

#include "eabo/fantasy.hpp"

#include <cmath>
#include <random>
#include <string>

#include <spdlog/spdlog.h>

#include "eabo/errors.hpp"
#include "eabo/numerics/normal.hpp"
#include "eabo/numerics/rng.hpp"

namespace eabo {

Eigen::VectorXd fantasy_eval_mean(const Posterior& post, const Eigen::VectorXd& x_cand, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& x) {
  if (y.size() != post.outputs()) throw DimensionMismatch("fantasy_eval_mean: y has the wrong size");
  const PointFeatures fc = post.features(x_cand);
  const PointFeatures fx = post.features(x);
  const Eigen::VectorXd noise = post.noise_eval_variance();
  Eigen::VectorXd out = fx.mean;
  for (int j = 0; j < post.outputs(); ++j) {
    const double denom = fc.variance(j) + noise(j);
    if (!(denom > 0.0)) throw NotPositiveDefinite("fantasy_eval_mean: zero predictive variance at x_cand");
    out(j) += post.covariance(j, fx, fc) / denom * (y(j) - fc.mean(j));
  }
  return out;
}

Eigen::VectorXd fantasy_eval_variance(const Posterior& post, const Eigen::VectorXd& x_cand, const Eigen::VectorXd& x) {
  const PointFeatures fc = post.features(x_cand);
  const PointFeatures fx = post.features(x);
  const Eigen::VectorXd noise = post.noise_eval_variance();
  Eigen::VectorXd out = fx.variance;
  for (int j = 0; j < post.outputs(); ++j) {
    const double c = post.covariance(j, fx, fc);
    out(j) = std::max(out(j) - c * c / (fc.variance(j) + noise(j)), 0.0);
  }
  return out;
}

double ComparisonUpdate::probability(int d) const { return numerics::normal_cdf(d == 1 ? tau : -tau); }

double ComparisonUpdate::mean_coefficient(int d) const {
  return d == 1 ? numerics::mills_ratio(tau) / nu : -numerics::mills_ratio(-tau) / nu;
}

double ComparisonUpdate::variance_coefficient(int d) const {
  const double t = d == 1 ? tau : -tau;
  const double lambda = numerics::mills_ratio(t);
  return lambda * (lambda + t) / (nu * nu);
}

ComparisonUpdate comparison_update(const Posterior& post, const PointFeatures& a, const PointFeatures& b,
                                   const Utility& utility, const UtilityQuadrature& quad) {
  ComparisonUpdate u;
  u.delta = delta_moments(utility, post.pair_moments(a, b), quad);
  const double sc = post.noise_comp_std();
  u.nu = std::sqrt(u.delta.variance + 2.0 * sc * sc);
  if (!(u.nu > 0.0)) throw DegenerateNu("comparison update: nu is zero");
  u.tau = u.delta.mean / u.nu;
  return u;
}

CrossCovariance cross_covariance(const Posterior& post, const PointFeatures& x, const PointFeatures& a,
                                 const PointFeatures& b) {
  const int m = post.outputs();
  CrossCovariance c{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (int j = 0; j < m; ++j) {
    c.with_a(j) = post.covariance(j, x, a);
    c.with_b(j) = post.covariance(j, x, b);
  }
  return c;
}

Eigen::VectorXd fantasy_comp_mean(const Posterior& post, const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b,
                                  int d, const Utility& utility, const Eigen::VectorXd& x,
                                  const UtilityQuadrature& quad) {
  const PointFeatures fa = post.features(x_a);
  const PointFeatures fb = post.features(x_b);
  const PointFeatures fx = post.features(x);
  const ComparisonUpdate update = comparison_update(post, fa, fb, utility, quad);
  return fx.mean + update.mean_coefficient(d) * update.gamma(cross_covariance(post, fx, fa, fb));
}

std::vector<Eigen::MatrixXd> fantasy_comp_covariance(const Posterior& post, const Eigen::VectorXd& x_a,
                                                     const Eigen::VectorXd& x_b, int d, const Utility& utility,
                                                     const Eigen::MatrixXd& queries, const UtilityQuadrature& quad) {
  const PointFeatures fa = post.features(x_a);
  const PointFeatures fb = post.features(x_b);
  const ComparisonUpdate update = comparison_update(post, fa, fb, utility, quad);
  const double coeff = update.variance_coefficient(d);
  const Eigen::Index n = queries.rows();
  const int m = post.outputs();
  Eigen::MatrixXd gammas(n, m);
  for (Eigen::Index i = 0; i < n; ++i) {
    const PointFeatures fx = post.features(queries.row(i).transpose());
    gammas.row(i) = update.gamma(cross_covariance(post, fx, fa, fb)).transpose();
  }
  const PosteriorMoments base = post.predict(queries);
  std::vector<Eigen::MatrixXd> out;
  for (int j = 0; j < m; ++j) {
    Eigen::MatrixXd cov = base.covariance[j] - coeff * gammas.col(j) * gammas.col(j).transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    Eigen::VectorXd values = eig.eigenvalues();
    if (values.size() > 0 && values.minCoeff() < -1e-10) {
      spdlog::warn("fantasy_comp_covariance: eigenvalue {:.3e} floored at zero", values.minCoeff());
    }
    if ((values.array() < 0.0).any()) {
      values = values.cwiseMax(0.0);
      cov = eig.eigenvectors() * values.asDiagonal() * eig.eigenvectors().transpose();
    }
    out.push_back(cov);
  }
  return out;
}

MatheronDraws MatheronDraws::generate(int count, int inducing_points, int outputs, std::uint64_t seed) {
  MatheronDraws draws;
  draws.residual.resize(count, outputs);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int s = 0; s < count; ++s) {
    numerics::Rng rng(numerics::derive_seed(seed, "matheron-draw", static_cast<std::uint64_t>(s)));
    std::vector<Eigen::VectorXd> per_output;
    for (int j = 0; j < outputs; ++j) {
      Eigen::VectorXd eps(inducing_points);
      for (int i = 0; i < inducing_points; ++i) eps(i) = normal(rng);
      per_output.push_back(std::move(eps));
      draws.residual(s, j) = normal(rng);
    }
    draws.inducing.push_back(std::move(per_output));
  }
  return draws;
}

Eigen::VectorXd matheron_observation(const Posterior& post, const PointFeatures& x, const MatheronDraws& draws,
                                     int draw) {
  const int m = post.outputs();
  const Eigen::VectorXd noise = post.noise_eval_variance();
  Eigen::VectorXd y(m);
  for (int j = 0; j < m; ++j) {
    const Eigen::VectorXd kinv_k = post.factor(j).inverse * x.k[j];
    const Eigen::VectorXd t = post.state().l_u[j].transpose() * kinv_k;
    const double q = std::max(post.kernel(j).variance() - x.k[j].dot(kinv_k), 0.0);
    y(j) = x.mean(j) + t.dot(draws.inducing[draw][j]) + std::sqrt(q + noise(j)) * draws.residual(draw, j);
  }
  return y;
}

MatheronSample matheron_fantasy_sample(const Posterior& post, const Eigen::VectorXd& x_cand, std::uint64_t seed,
                                       const Eigen::MatrixXd& queries) {
  const PointFeatures fc = post.features(x_cand);
  const MatheronDraws draws = MatheronDraws::generate(1, post.inducing(), post.outputs(), seed);
  MatheronSample sample;
  sample.y = matheron_observation(post, fc, draws, 0);
  sample.fantasy_mean.resize(queries.rows(), post.outputs());
  for (Eigen::Index i = 0; i < queries.rows(); ++i) {
    sample.fantasy_mean.row(i) = fantasy_eval_mean(post, x_cand, sample.y, queries.row(i).transpose()).transpose();
  }
  return sample;
}

}  // namespace eabo
