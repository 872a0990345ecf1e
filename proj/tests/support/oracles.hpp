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

// Reference computations shared by the unit tests and the acceptance binary.
// Each returns one error figure per instance; callers compare against their
// tolerance.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "eabo/acquisition.hpp"
#include "eabo/fantasy.hpp"
#include "eabo/numerics/optimize.hpp"
#include "eabo/surrogate.hpp"
#include "random_instances.hpp"

namespace eabo::testing {

inline double normal_pdf(double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); }
inline double normal_cdf(double t) { return 0.5 * std::erfc(-t / std::sqrt(2.0)); }

inline double log_normal_cdf_reference(double t) {
  if (t > -30.0) return std::log(normal_cdf(t));
  // Asymptotic series of the Mills ratio; relative error below 1e-10 here.
  const double t2 = t * t;
  const double series = 1.0 - 1.0 / t2 + 3.0 / (t2 * t2) - 15.0 / (t2 * t2 * t2) + 105.0 / (t2 * t2 * t2 * t2);
  return -0.5 * t2 - std::log(-t) - 0.5 * std::log(2.0 * M_PI) + std::log(series);
}

// ---------------------------------------------------------------------------
// Gradients

inline std::vector<double> elbo_gradient_errors(int instances, std::uint64_t seed = 11) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  for (int trial = 0; trial < instances; ++trial) {
    const int dim = 1 + trial % 3;
    const int m = 1 + trial % 2;
    const int M = 2 + trial % 7;
    VariationalState s = random_state(rng, M, dim, m);
    MixedDataset data = random_dataset(rng, trial % 6, (trial * 7) % 6, dim, m);
    const Utility u = (trial % 4 == 3 && m == 2) ? Utility::default_chebyshev(m) : Utility::default_linear(m);
    const UtilityQuadrature quad = UtilityQuadrature::for_outputs(m);
    const Eigen::VectorXd theta = pack_parameters(s);
    numerics::ObjectiveWithGradient f = [&](const Eigen::VectorXd& t, Eigen::VectorXd& g) {
      VariationalState st = unpack_parameters(t, s);
      return elbo_with_gradient(st, data, u, quad, g).total;
    };
    out.push_back(numerics::finite_difference_check(f, theta, 1e-5));
  }
  return out;
}

struct AcquisitionInstance {
  VariationalState state;
  MixedDataset data;
  Utility utility = Utility::default_linear(1);
  Eigen::MatrixXd inner;
};

inline AcquisitionInstance acquisition_instance(std::mt19937_64& rng, int trial) {
  const int dim = 1 + trial % 3;
  const int m = 1 + (trial / 3) % 2;
  const int M = 3 + trial % 6;
  AcquisitionInstance in{random_state(rng, M, dim, m), random_dataset(rng, trial % 6, (trial * 5) % 6, dim, m),
                         trial % 2 == 1 && m == 2 ? Utility::default_chebyshev(m) : Utility::default_linear(m),
                         Eigen::MatrixXd(3, dim)};
  for (int k = 0; k < 3; ++k) in.inner.row(k) = uniform_point(rng, dim).transpose();
  return in;
}

inline Eigen::VectorXd join_rows(const Eigen::VectorXd& head, const Eigen::MatrixXd& inner) {
  Eigen::VectorXd v(head.size() + inner.size());
  v.head(head.size()) = head;
  for (Eigen::Index k = 0; k < inner.rows(); ++k) v.segment(head.size() + k * inner.cols(), inner.cols()) = inner.row(k);
  return v;
}

inline Eigen::MatrixXd split_rows(const Eigen::VectorXd& v, Eigen::Index offset, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd inner(rows, cols);
  for (Eigen::Index k = 0; k < rows; ++k) inner.row(k) = v.segment(offset + k * cols, cols).transpose();
  return inner;
}

inline std::vector<double> eval_acquisition_gradient_errors(int instances, std::uint64_t seed = 21) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  for (int trial = 0; trial < instances; ++trial) {
    AcquisitionInstance in = acquisition_instance(rng, trial);
    const Posterior post(in.state);
    const int dim = post.dim();
    const UtilityQuadrature quad = UtilityQuadrature::for_outputs(post.outputs());
    const MatheronDraws draws = MatheronDraws::generate(4, post.inducing(), post.outputs(), 100 + trial);
    const Eigen::VectorXd x = uniform_point(rng, dim);
    numerics::ObjectiveWithGradient f = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
      Eigen::VectorXd gx;
      Eigen::MatrixXd gi;
      const double val = eval_one_shot(post, in.utility, quad, draws, v.head(dim), split_rows(v, dim, 3, dim), &gx, &gi);
      g = join_rows(gx, gi);
      return val;
    };
    out.push_back(numerics::finite_difference_check(f, join_rows(x, in.inner), 1e-6));
  }
  return out;
}

inline std::vector<double> comp_acquisition_gradient_errors(int instances, std::uint64_t seed = 22) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  for (int trial = 0; trial < instances; ++trial) {
    AcquisitionInstance in = acquisition_instance(rng, trial);
    const Posterior post(in.state);
    const int dim = post.dim();
    const UtilityQuadrature quad = UtilityQuadrature::for_outputs(post.outputs());
    Eigen::VectorXd ab(2 * dim);
    ab << uniform_point(rng, dim), uniform_point(rng, dim);
    numerics::ObjectiveWithGradient f = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
      Eigen::VectorXd ga, gb;
      Eigen::MatrixXd gi;
      const double val = comp_one_shot(post, in.utility, quad, v.head(dim), v.segment(dim, dim),
                                       split_rows(v, 2 * dim, 3, dim), &ga, &gb, &gi);
      Eigen::VectorXd head(2 * dim);
      head << ga, gb;
      g = join_rows(head, gi);
      return val;
    };
    out.push_back(numerics::finite_difference_check(f, join_rows(ab, in.inner), 1e-6));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Comparison fantasies

struct Triple {
  Eigen::VectorXd x, a, b;
};

inline Triple random_triple(std::mt19937_64& rng, int dim) {
  return {uniform_point(rng, dim), uniform_point(rng, dim), uniform_point(rng, dim)};
}

inline Eigen::MatrixXd stack(const Triple& t) {
  Eigen::MatrixXd m(3, t.x.size());
  m.row(0) = t.x.transpose();
  m.row(1) = t.a.transpose();
  m.row(2) = t.b.transpose();
  return m;
}

/// Per instance, the largest |analytic - MC| / SE over both outcomes and all
/// outputs, and the smallest outcome count seen.
struct MonteCarloCheck {
  std::vector<double> z;
  int min_count = 0;
};

inline MonteCarloCheck fantasy_monte_carlo_z(int instances, int samples = 1000000, std::uint64_t seed = 404) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MonteCarloCheck out;
  out.min_count = samples;
  for (int trial = 0; trial < instances; ++trial) {
    const int dim = 1 + trial % 3;
    const int m = 1 + trial % 2;
    const VariationalState state = random_state(rng, 4 + trial % 4, dim, m);
    const Posterior post(state);
    Eigen::VectorXd w(m);
    for (int j = 0; j < m; ++j) w(j) = 0.3 + 0.7 * std::uniform_real_distribution<double>(0, 1)(rng);
    const Utility utility = Utility::linear(w);
    const UtilityQuadrature quad = UtilityQuadrature::for_outputs(m);
    const Triple t = random_triple(rng, dim);
    const PosteriorMoments pm = post.predict(stack(t));
    std::vector<Eigen::MatrixXd> chol;
    for (int j = 0; j < m; ++j) chol.push_back(pm.covariance[j].llt().matrixL());
    const double noise_sd = std::sqrt(2.0) * post.noise_comp_std();
    std::mt19937_64 mc(7000 + trial);

    // Accumulate f(x) conditional on the simulated outcome d.
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(2, m), sum_sq = Eigen::MatrixXd::Zero(2, m);
    int count[2] = {0, 0};
    for (int s = 0; s < samples; ++s) {
      Eigen::VectorXd fx(m);
      double delta = 0.0;
      for (int j = 0; j < m; ++j) {
        const Eigen::Vector3d z(normal(mc), normal(mc), normal(mc));
        const Eigen::Vector3d f = pm.mean.col(j) + chol[j] * z;
        fx(j) = f(0);
        delta += w(j) * (f(1) - f(2));
      }
      const int d = delta + noise_sd * normal(mc) > 0.0 ? 1 : 0;
      ++count[d];
      sum.row(d) += fx.transpose();
      sum_sq.row(d) += fx.cwiseAbs2().transpose();
    }
    double worst = 0.0;
    for (int d = 0; d < 2; ++d) {
      out.min_count = std::min(out.min_count, count[d]);
      if (count[d] < 2) {
        worst = INFINITY;
        continue;
      }
      const Eigen::VectorXd analytic = fantasy_comp_mean(post, t.a, t.b, d, utility, t.x, quad);
      for (int j = 0; j < m; ++j) {
        const double mean = sum(d, j) / count[d];
        const double var = sum_sq(d, j) / count[d] - mean * mean;
        worst = std::max(worst, std::abs(analytic(j) - mean) / std::sqrt(var / count[d]));
      }
    }
    out.z.push_back(worst);
  }
  return out;
}

/// Largest |P(1) m1 + P(0) m0 - mu| over outputs, or |P(0) + P(1) - 1| if
/// larger, per instance.
inline std::vector<double> martingale_errors(int instances, std::uint64_t seed = 405) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  for (int trial = 0; trial < instances; ++trial) {
    const int dim = 1 + trial % 4;
    const int m = 1 + trial % 2;
    const VariationalState state = random_state(rng, 3 + trial % 5, dim, m);
    const Posterior post(state);
    const Utility utility = trial % 4 == 3 ? Utility::default_chebyshev(m) : Utility::default_linear(m);
    const UtilityQuadrature quad = UtilityQuadrature::for_outputs(m);
    const Triple t = random_triple(rng, dim);
    const ComparisonUpdate update = comparison_update(post, post.features(t.a), post.features(t.b), utility, quad);
    const Eigen::VectorXd mix = update.probability(1) * fantasy_comp_mean(post, t.a, t.b, 1, utility, t.x, quad) +
                                update.probability(0) * fantasy_comp_mean(post, t.a, t.b, 0, utility, t.x, quad);
    const double mass = std::abs(update.probability(0) + update.probability(1) - 1.0);
    out.push_back(std::max(mass, (mix - post.mean(t.x)).cwiseAbs().maxCoeff()));
  }
  return out;
}

/// Single output, linear utility, 2 sigma_c^2 = 1: the fantasy mean against
/// the closed-form probit update, largest error over both outcomes.
inline std::vector<double> scalar_reduction_errors(int instances, std::uint64_t seed = 406) {
  std::mt19937_64 rng(seed);
  std::vector<double> out;
  for (int trial = 0; trial < instances; ++trial) {
    const int dim = 1 + trial % 3;
    VariationalState state = random_state(rng, 3 + trial % 6, dim, 1);
    state.log_noise_comp = std::log(std::sqrt(0.5));
    const Posterior post(state);
    const Utility utility = Utility::linear(Eigen::VectorXd::Ones(1));
    const UtilityQuadrature quad = UtilityQuadrature::for_outputs(1);
    const Triple t = random_triple(rng, dim);
    // Moments from the posterior's own per-point features, so the comparison
    // isolates the update formula from K_ZZ round-off.
    const PointFeatures fx = post.features(t.x), fa = post.features(t.a), fb = post.features(t.b);
    const double var_delta = fa.variance(0) + fb.variance(0) - 2.0 * post.covariance(0, fa, fb);
    const double nu = std::sqrt(var_delta + 1.0);
    const double tau = (fa.mean(0) - fb.mean(0)) / nu;
    const double gamma = post.covariance(0, fx, fa) - post.covariance(0, fx, fb);
    const double up = fx.mean(0) + gamma * normal_pdf(tau) / normal_cdf(tau) / nu;
    const double down = fx.mean(0) - gamma * normal_pdf(-tau) / normal_cdf(-tau) / nu;
    out.push_back(std::max(std::abs(fantasy_comp_mean(post, t.a, t.b, 1, utility, t.x, quad)(0) - up),
                           std::abs(fantasy_comp_mean(post, t.a, t.b, 0, utility, t.x, quad)(0) - down)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Surrogate

// E[log Phi(s D / (sqrt(2) sigma))] for D ~ N(mean, var) by the trapezoid rule.
inline double trapezoid_comp_term(double mean, double var, double sigma, int s) {
  constexpr int kPoints = 400001;
  const double sd = std::sqrt(var);
  const double lo = -14.0, hi = 14.0, h = (hi - lo) / (kPoints - 1);
  double total = 0.0;
  for (int i = 0; i < kPoints; ++i) {
    const double z = lo + i * h;
    const double w = (i == 0 || i == kPoints - 1) ? 0.5 : 1.0;
    total += w * std::exp(-0.5 * z * z) * log_normal_cdf_reference(s * (mean + sd * z) / (std::sqrt(2.0) * sigma));
  }
  return total * h / std::sqrt(2.0 * M_PI);
}

/// Comparison likelihood term against the trapezoid; sigma_c cycles through
/// 0.1, 0.5, 1.
inline std::vector<double> comp_term_errors(int configs, std::uint64_t seed = 12) {
  std::mt19937_64 rng(seed);
  const double sigmas[] = {0.1, 0.5, 1.0};
  std::vector<double> out;
  for (int trial = 0; trial < configs; ++trial) {
    const int dim = 1 + trial % 3;
    const int m = 1 + trial % 2;
    VariationalState s = random_state(rng, 3 + trial % 5, dim, m);
    const double sigma = sigmas[trial % 3];
    s.log_noise_comp = std::log(sigma);
    Eigen::VectorXd w(m);
    for (int j = 0; j < m; ++j) w(j) = 0.2 + std::uniform_real_distribution<double>(0, 1)(rng);
    const Utility u = Utility::linear(w);
    const CompRecord rec{uniform_point(rng, dim), uniform_point(rng, dim), trial % 2};
    Eigen::MatrixXd pts(2, dim);
    pts.row(0) = rec.x_a.transpose();
    pts.row(1) = rec.x_b.transpose();
    const PosteriorMoments pm = predict(s, pts);
    double mean = 0.0, var = 0.0;
    for (int j = 0; j < m; ++j) {
      const Eigen::MatrixXd& c = pm.covariance[j];
      mean += w(j) * (pm.mean(0, j) - pm.mean(1, j));
      var += w(j) * w(j) * (c(0, 0) + c(1, 1) - 2.0 * c(0, 1));
    }
    const double expected = trapezoid_comp_term(mean, var, sigma, 2 * rec.d - 1);
    out.push_back(std::abs(elbo_comp_term(s, rec, u, UtilityQuadrature::for_outputs(m)) - expected));
  }
  return out;
}

/// One-dimensional regression with inducing points fixed at the data: largest
/// |sparse mean - exact GP mean| over 20 held-out points, per problem.
inline std::vector<double> sparse_exact_gap(int problems, std::uint64_t seed = 13) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> out;
  for (int problem = 0; problem < problems; ++problem) {
    const int n = 8 + problem;
    const double freq = 2.0 + problem % 5;
    MixedDataset data;
    Eigen::MatrixXd x(n, 1);
    for (int i = 0; i < n; ++i) {
      x(i, 0) = uniform_point(rng, 1)(0);
      data.evals.push_back({x.row(i).transpose(), Eigen::VectorXd::Constant(1, std::sin(freq * x(i, 0)) + 0.1 * normal(rng))});
    }
    const Utility u = Utility::default_linear(1);
    FitConfig config;
    config.inducing = n;
    config.learn_inducing = false;
    config.warm_steps = 600;
    const VariationalState start = VariationalState::prior(KernelHyperparams::constant(1, 1, 0.3, 1.0), x,
                                                           Eigen::VectorXd::Constant(1, 0.2), 0.2);
    const FitResult fitted = fit(data, u, 1, config, start, 99);
    const VariationalState& s = fitted.state;
    if (!s.z.isApprox(x)) {
      out.push_back(INFINITY);
      continue;
    }
    // Exact GP regression with the fitted hyperparameters.
    const double s2 = std::exp(2.0 * s.log_noise_eval(0));
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = data.evals[i].y(0);
    const Eigen::MatrixXd kxx = kernel_matrix(s.kernel, 0, x, x) + s2 * Eigen::MatrixXd::Identity(n, n);
    const Eigen::VectorXd alpha = kxx.llt().solve(y);
    Eigen::MatrixXd held(20, 1);
    for (int i = 0; i < 20; ++i) held(i, 0) = uniform_point(rng, 1)(0);
    const Eigen::VectorXd exact = kernel_matrix(s.kernel, 0, held, x) * alpha;
    const PosteriorMoments pm = predict(s, held);
    out.push_back((pm.mean.col(0) - exact).cwiseAbs().maxCoeff());
  }
  return out;
}

}  // namespace eabo::testing
