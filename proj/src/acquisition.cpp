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

#include "eabo/acquisition.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>

#include <spdlog/spdlog.h>

#include "eabo/errors.hpp"
#include "eabo/numerics/normal.hpp"
#include "eabo/numerics/optimize.hpp"
#include "eabo/numerics/rng.hpp"
#include "eabo/numerics/sobol.hpp"

namespace eabo {
namespace {

constexpr double kTieTolerance = 1e-12;

ExpectedUtility eu(const Utility& utility, const Eigen::VectorXd& mean, const Eigen::VectorXd& var,
                   const UtilityQuadrature& quad) {
  return expected_utility_with_gradient(utility, mean, var, quad);
}

Eigen::VectorXd row(const Eigen::MatrixXd& m, Eigen::Index i) { return m.row(i).transpose(); }

numerics::OptimizerConfig outer_optimizer(const AcquisitionConfig& config) {
  numerics::OptimizerConfig opt;
  opt.learning_rate = config.learning_rate;
  opt.steps = config.steps;
  opt.clip_norm = config.clip_norm;
  return opt;
}

// Incumbent first, then the supplied anchors, then Sobol jitter around the incumbent.
Eigen::MatrixXd initial_inner(const Eigen::VectorXd& incumbent, const std::vector<Eigen::VectorXd>& anchors, int count,
                              double jitter, std::uint64_t seed) {
  const Eigen::Index dim = incumbent.size();
  Eigen::MatrixXd inner(count, dim);
  int k = 0;
  inner.row(k++) = incumbent.transpose();
  for (const auto& a : anchors) {
    if (k >= count) break;
    inner.row(k++) = a.transpose();
  }
  if (k < count) {
    const Eigen::MatrixXd sob = numerics::sobol_points(count - k, static_cast<int>(dim), seed);
    for (int i = 0; k < count; ++i, ++k) {
      const Eigen::VectorXd p = incumbent + 2.0 * jitter * (row(sob, i) - Eigen::VectorXd::Constant(dim, 0.5));
      inner.row(k) = p.cwiseMax(0.0).cwiseMin(1.0).transpose();
    }
  }
  return inner;
}

Eigen::VectorXd flatten(const std::vector<Eigen::VectorXd>& heads, const Eigen::MatrixXd& inner) {
  Eigen::Index size = inner.size();
  for (const auto& h : heads) size += h.size();
  Eigen::VectorXd v(size);
  Eigen::Index idx = 0;
  for (const auto& h : heads) {
    v.segment(idx, h.size()) = h;
    idx += h.size();
  }
  for (Eigen::Index k = 0; k < inner.rows(); ++k) {
    v.segment(idx, inner.cols()) = inner.row(k).transpose();
    idx += inner.cols();
  }
  return v;
}

Eigen::MatrixXd unflatten_inner(const Eigen::VectorXd& v, Eigen::Index offset, int count, int dim) {
  Eigen::MatrixXd inner(count, dim);
  for (int k = 0; k < count; ++k) inner.row(k) = v.segment(offset + k * dim, dim).transpose();
  return inner;
}

}  // namespace

void CostModel::validate() const {
  if (!(c_eval > 0.0) || !std::isfinite(c_eval)) throw ValidationError("costs.c_eval", "must be positive");
  if (!(c_comp > 0.0) || !std::isfinite(c_comp)) throw ValidationError("costs.c_comp", "must be positive");
  if (!(budget > 0.0) || !std::isfinite(budget)) throw ValidationError("costs.budget", "must be positive");
}

std::string_view source_name(Source source) { return source == Source::Evaluate ? "evaluate" : "compare"; }

void AcquisitionConfig::validate() const {
  if (restarts < 1) throw ValidationError("acquisition.restarts", "must be at least 1");
  if (steps < 1) throw ValidationError("acquisition.steps", "must be at least 1");
  if (!(learning_rate > 0.0)) throw ValidationError("acquisition.lr", "must be positive");
  if (!(clip_norm > 0.0)) throw ValidationError("acquisition.clip_norm", "must be positive");
  if (fantasy_points < 1) throw ValidationError("acquisition.K", "must be at least 1");
  if (mc_draws < 1) throw ValidationError("acquisition.mc_draws", "must be at least 1");
  if (!(epsilon >= 0.0)) throw ValidationError("acquisition.epsilon", "must be nonnegative");
  if (utility_candidates < 1 || utility_starts < 1 || utility_steps < 0) {
    throw ValidationError("acquisition.utility_candidates", "dataset-utility search sizes must be positive");
  }
}

double expected_utility_at(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                           const Eigen::VectorXd& x, Eigen::VectorXd* gradient) {
  const bool want = gradient != nullptr;
  const PointFeatures f = post.features(x, want);
  if (!want) return expected_utility(utility, f.mean, f.variance, quad);
  const ExpectedUtility e = eu(utility, f.mean, f.variance, quad);
  gradient->setZero(x.size());
  for (int j = 0; j < post.outputs(); ++j) {
    *gradient += e.d_mean(j) * post.mean_grad(j, f);
    if (e.d_variance(j) != 0.0) *gradient += e.d_variance(j) * post.variance_grad(j, f);
  }
  return e.value;
}

DatasetUtility dataset_utility(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                               const AcquisitionConfig& config, std::uint64_t seed,
                               const std::vector<Eigen::VectorXd>& extra) {
  const int dim = post.dim();
  const Eigen::MatrixXd sob = numerics::sobol_points(config.utility_candidates, dim, seed);
  std::vector<Eigen::VectorXd> candidates;
  candidates.reserve(sob.rows() + extra.size());
  for (const auto& e : extra) candidates.push_back(e.cwiseMax(0.0).cwiseMin(1.0));
  for (Eigen::Index i = 0; i < sob.rows(); ++i) candidates.push_back(row(sob, i));

  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    scores[i] = expected_utility_at(post, utility, quad, candidates[i]);
  }
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  DatasetUtility best{scores[order[0]], candidates[order[0]]};
  numerics::OptimizerConfig opt;
  opt.learning_rate = config.utility_learning_rate;
  opt.steps = config.utility_steps;
  opt.clip_norm = config.clip_norm;
  const numerics::Box box = numerics::Box::unit(dim);
  const int starts = std::min<int>(config.utility_starts, static_cast<int>(order.size()));
  for (int s = 0; s < starts && config.utility_steps > 0; ++s) {
    auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      const double v = expected_utility_at(post, utility, quad, x, &g);
      g = -g;
      return -v;
    };
    const numerics::MinimizeResult r = numerics::adam_minimize(objective, candidates[order[s]], opt, box);
    if (-r.value > best.value) best = {-r.value, r.point};
  }
  return best;
}

double eval_one_shot(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                     const MatheronDraws& draws, const Eigen::VectorXd& x, const Eigen::MatrixXd& inner,
                     Eigen::VectorXd* grad_x, Eigen::MatrixXd* grad_inner) {
  const bool want = grad_x != nullptr && grad_inner != nullptr;
  const int m = post.outputs();
  const int K = static_cast<int>(inner.rows());
  const int S = draws.count();
  const bool linear = utility.is_linear();
  const Eigen::VectorXd noise = post.noise_eval_variance();

  const PointFeatures fc = post.features(x, want);
  std::vector<PointFeatures> fk;
  fk.reserve(K);
  for (int k = 0; k < K; ++k) fk.push_back(post.features(row(inner, k), want));

  // Per output: kinv_k, t = L^T K^-1 k_c, A = Q + s^2, D = A + |t|^2.
  std::vector<Eigen::VectorXd> kinv_k(m), t(m);
  Eigen::VectorXd a_val(m), d_val(m);
  std::vector<bool> q_clipped(m);
  for (int j = 0; j < m; ++j) {
    kinv_k[j] = post.factor(j).inverse * fc.k[j];
    t[j] = post.state().l_u[j].transpose() * kinv_k[j];
    const double q = post.kernel(j).variance() - fc.k[j].dot(kinv_k[j]);
    q_clipped[j] = q < 0.0;
    a_val(j) = std::max(q, 0.0) + noise(j);
    d_val(j) = a_val(j) + t[j].squaredNorm();
  }
  Eigen::MatrixXd cov(K, m), var_f(K, m);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> var_clipped(K, m);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < m; ++j) {
      cov(k, j) = post.covariance(j, fk[k], fc);
      const double v = fk[k].variance(j) - cov(k, j) * cov(k, j) / d_val(j);
      var_clipped(k, j) = v < 0.0;
      var_f(k, j) = std::max(v, 0.0);
    }
  }

  Eigen::MatrixXd g_mean = Eigen::MatrixXd::Zero(K, m), g_var = Eigen::MatrixXd::Zero(K, m),
                  g_cov = Eigen::MatrixXd::Zero(K, m);
  std::vector<Eigen::VectorXd> g_t(m);
  Eigen::VectorXd g_a = Eigen::VectorXd::Zero(m);
  for (int j = 0; j < m; ++j) g_t[j] = Eigen::VectorXd::Zero(post.inducing());

  double total = 0.0;
  Eigen::VectorXd r(m), mean_f(m);
  for (int s = 0; s < S; ++s) {
    for (int j = 0; j < m; ++j) {
      r(j) = t[j].dot(draws.inducing[s][j]) + std::sqrt(a_val(j)) * draws.residual(s, j);
    }
    int best_k = 0;
    double best = -std::numeric_limits<double>::infinity();
    ExpectedUtility best_eu;
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < m; ++j) mean_f(j) = fk[k].mean(j) + cov(k, j) * r(j) / d_val(j);
      if (linear && !want) {
        const double v = utility.weights().dot(mean_f);
        if (v > best) {
          best = v;
          best_k = k;
        }
        continue;
      }
      ExpectedUtility e = eu(utility, mean_f, var_f.row(k).transpose(), quad);
      if (e.value > best) {
        best = e.value;
        best_k = k;
        best_eu = std::move(e);
      }
    }
    total += best;
    if (!want) continue;
    const double w = 1.0 / S;
    const int k = best_k;
    for (int j = 0; j < m; ++j) {
      const double gm = w * best_eu.d_mean(j);
      const double gv = var_clipped(k, j) ? 0.0 : w * best_eu.d_variance(j);
      const double c = cov(k, j);
      const double dj = d_val(j);
      g_mean(k, j) += gm;
      g_var(k, j) += gv;
      g_cov(k, j) += gm * r(j) / dj - 2.0 * gv * c / dj;
      const double g_r = gm * c / dj;
      const double g_d = -gm * c * r(j) / (dj * dj) + gv * c * c / (dj * dj);
      g_t[j] += g_r * draws.inducing[s][j] + 2.0 * g_d * t[j];
      g_a(j) += g_r * draws.residual(s, j) / (2.0 * std::sqrt(a_val(j))) + g_d;
    }
  }
  total /= S;
  if (!want) return total;

  grad_x->setZero(x.size());
  grad_inner->setZero(K, x.size());
  for (int j = 0; j < m; ++j) {
    // t = L^T K^-1 k_c and Q = s2 - k_c^T K^-1 k_c.
    Eigen::VectorXd g_k = post.factor(j).inverse * (post.state().l_u[j] * g_t[j]);
    if (!q_clipped[j]) g_k -= 2.0 * g_a(j) * kinv_k[j];
    *grad_x += fc.jac[j].transpose() * g_k;
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd gi = g_mean(k, j) * post.mean_grad(j, fk[k]);
      if (g_var(k, j) != 0.0) gi += g_var(k, j) * post.variance_grad(j, fk[k]);
      if (g_cov(k, j) != 0.0) {
        gi += g_cov(k, j) * post.covariance_grad_a(j, fk[k], fc);
        *grad_x += g_cov(k, j) * post.covariance_grad_a(j, fc, fk[k]);
      }
      grad_inner->row(k) += gi.transpose();
    }
  }
  return total;
}

double comp_one_shot(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                     const Eigen::VectorXd& x_a, const Eigen::VectorXd& x_b, const Eigen::MatrixXd& inner,
                     Eigen::VectorXd* grad_a, Eigen::VectorXd* grad_b, Eigen::MatrixXd* grad_inner) {
  const bool want = grad_a != nullptr && grad_b != nullptr && grad_inner != nullptr;
  const int m = post.outputs();
  const int K = static_cast<int>(inner.rows());
  const PointFeatures fa = post.features(x_a, want);
  const PointFeatures fb = post.features(x_b, want);
  std::vector<PointFeatures> fk;
  fk.reserve(K);
  for (int k = 0; k < K; ++k) fk.push_back(post.features(row(inner, k), want));

  const PairMoments pair = post.pair_moments(fa, fb);
  DeltaMomentsGradient dgrad;
  const DeltaMoments delta = want ? delta_moments_with_gradient(utility, pair, quad, dgrad)
                                  : delta_moments(utility, pair, quad);
  const double sc = post.noise_comp_std();
  const double nu = std::sqrt(delta.variance + 2.0 * sc * sc);
  if (!(nu > 0.0)) throw DegenerateNu("comp_one_shot: nu is zero");
  const double tau = delta.mean / nu;

  Eigen::MatrixXd cov_a(K, m), cov_b(K, m), gamma(K, m);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < m; ++j) {
      cov_a(k, j) = post.covariance(j, fk[k], fa);
      cov_b(k, j) = post.covariance(j, fk[k], fb);
      gamma(k, j) = delta.weight_a(j) * cov_a(k, j) - delta.weight_b(j) * cov_b(k, j);
    }
  }

  double total = 0.0;
  double g_tau = 0.0, g_nu = 0.0;
  Eigen::MatrixXd g_mean = Eigen::MatrixXd::Zero(K, m), g_var = Eigen::MatrixXd::Zero(K, m),
                  g_gamma = Eigen::MatrixXd::Zero(K, m);
  Eigen::VectorXd mean_f(m), var_f(m);
  for (int sign : {1, -1}) {
    const double ts = sign * tau;
    const double lambda = numerics::mills_ratio(ts);
    const double p = numerics::normal_cdf(ts);
    const double c1 = sign * lambda / nu;
    const double h = lambda * (lambda + ts);
    const double c2 = h / (nu * nu);
    int best_k = 0;
    double best = -std::numeric_limits<double>::infinity();
    ExpectedUtility best_eu;
    std::vector<bool> clipped(m, false), best_clipped(m, false);
    for (int k = 0; k < K; ++k) {
      for (int j = 0; j < m; ++j) {
        mean_f(j) = fk[k].mean(j) + c1 * gamma(k, j);
        const double v = fk[k].variance(j) - c2 * gamma(k, j) * gamma(k, j);
        clipped[j] = v < 0.0;
        var_f(j) = std::max(v, 0.0);
      }
      ExpectedUtility e = eu(utility, mean_f, var_f, quad);
      if (e.value > best) {
        best = e.value;
        best_k = k;
        best_eu = std::move(e);
        best_clipped = clipped;
      }
    }
    total += p * best;
    if (!want) continue;
    const int k = best_k;
    g_tau += sign * numerics::normal_pdf(ts) * best;
    double g_c1 = 0.0, g_c2 = 0.0;
    for (int j = 0; j < m; ++j) {
      const double gm = p * best_eu.d_mean(j);
      const double gv = best_clipped[j] ? 0.0 : p * best_eu.d_variance(j);
      const double gk = gamma(k, j);
      g_mean(k, j) += gm;
      g_var(k, j) += gv;
      g_gamma(k, j) += c1 * gm - 2.0 * c2 * gk * gv;
      g_c1 += gm * gk;
      g_c2 -= gv * gk * gk;
    }
    const double dlambda = numerics::mills_ratio_derivative(ts);
    const double dh = dlambda * (lambda + ts) + lambda * (dlambda + 1.0);
    g_tau += g_c1 * dlambda / nu + g_c2 * sign * dh / (nu * nu);
    g_nu += -g_c1 * c1 / nu - 2.0 * g_c2 * c2 / nu;
  }
  if (!want) return total;

  g_nu += -g_tau * tau / nu;
  const double g_delta_mean = g_tau / nu;
  const double g_delta_var = g_nu / (2.0 * nu);

  grad_a->setZero(x_a.size());
  grad_b->setZero(x_b.size());
  grad_inner->setZero(K, x_a.size());
  for (int j = 0; j < m; ++j) {
    const double gma = g_delta_mean * dgrad.d_mean.mean_a(j) + g_delta_var * dgrad.d_variance.mean_a(j);
    const double gmb = g_delta_mean * dgrad.d_mean.mean_b(j) + g_delta_var * dgrad.d_variance.mean_b(j);
    const double gva = g_delta_mean * dgrad.d_mean.var_a(j) + g_delta_var * dgrad.d_variance.var_a(j);
    const double gvb = g_delta_mean * dgrad.d_mean.var_b(j) + g_delta_var * dgrad.d_variance.var_b(j);
    const double gcab = g_delta_mean * dgrad.d_mean.cov_ab(j) + g_delta_var * dgrad.d_variance.cov_ab(j);
    *grad_a += gma * post.mean_grad(j, fa) + gva * post.variance_grad(j, fa) + gcab * post.covariance_grad_a(j, fa, fb);
    *grad_b += gmb * post.mean_grad(j, fb) + gvb * post.variance_grad(j, fb) + gcab * post.covariance_grad_a(j, fb, fa);
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd gi = Eigen::VectorXd::Zero(x_a.size());
      if (g_mean(k, j) != 0.0) gi += g_mean(k, j) * post.mean_grad(j, fk[k]);
      if (g_var(k, j) != 0.0) gi += g_var(k, j) * post.variance_grad(j, fk[k]);
      const double gg = g_gamma(k, j);
      if (gg != 0.0) {
        const double gca = gg * delta.weight_a(j);
        const double gcb = -gg * delta.weight_b(j);
        gi += gca * post.covariance_grad_a(j, fk[k], fa) + gcb * post.covariance_grad_a(j, fk[k], fb);
        *grad_a += gca * post.covariance_grad_a(j, fa, fk[k]);
        *grad_b += gcb * post.covariance_grad_a(j, fb, fk[k]);
      }
      grad_inner->row(k) += gi.transpose();
    }
  }
  return total;
}

AcquisitionResult voi_eval(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                           const CostModel& costs, const AcquisitionConfig& config, const DatasetUtility& current,
                           std::uint64_t seed) {
  const int dim = post.dim();
  const int K = config.fantasy_points;
  const MatheronDraws draws =
      MatheronDraws::generate(config.mc_draws, post.inducing(), post.outputs(), numerics::derive_seed(seed, "draws"));
  const Eigen::MatrixXd starts = numerics::sobol_points(config.restarts, dim, numerics::derive_seed(seed, "starts"));
  const numerics::Box box = numerics::Box::unit(dim * (1 + K));
  const numerics::OptimizerConfig opt = outer_optimizer(config);

  AcquisitionResult result;
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_point;
  for (int r = 0; r < config.restarts; ++r) {
    const Eigen::VectorXd x0 = row(starts, r);
    const Eigen::MatrixXd inner0 = initial_inner(current.argmax, {x0}, K, config.inner_jitter,
                                                 numerics::derive_seed(seed, "inner", static_cast<std::uint64_t>(r)));
    auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
      const Eigen::VectorXd x = v.head(dim);
      const Eigen::MatrixXd inner = unflatten_inner(v, dim, K, dim);
      Eigen::VectorXd gx;
      Eigen::MatrixXd gi;
      const double value = eval_one_shot(post, utility, quad, draws, x, inner, &gx, &gi);
      g = -flatten({gx}, gi);
      return -value;
    };
    const numerics::MinimizeResult res = numerics::adam_minimize(objective, flatten({x0}, inner0), opt, box);
    result.restart_values.push_back(-res.value);
    if (-res.value > best) {
      best = -res.value;
      best_point = res.point;
    }
  }
  result.action = Action::evaluate(best_point.head(dim), costs.c_eval);
  result.fantasy_points = unflatten_inner(best_point, dim, K, dim);
  result.voi_raw = best - current.value;
  result.voi = std::max(result.voi_raw, 0.0);
  result.voi_per_cost = result.voi / costs.c_eval;
  return result;
}

AcquisitionResult voi_comp(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                           const CostModel& costs, const AcquisitionConfig& config, const DatasetUtility& current,
                           std::uint64_t seed) {
  const int dim = post.dim();
  const int K = config.fantasy_points;
  const Eigen::MatrixXd starts =
      numerics::sobol_points(config.restarts, 2 * dim, numerics::derive_seed(seed, "starts"));
  const numerics::Box box = numerics::Box::unit(dim * (2 + K));
  const numerics::OptimizerConfig opt = outer_optimizer(config);

  AcquisitionResult result;
  double best = -std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_point;
  for (int r = 0; r < config.restarts; ++r) {
    const Eigen::VectorXd xa0 = starts.row(r).head(dim).transpose();
    const Eigen::VectorXd xb0 = starts.row(r).tail(dim).transpose();
    const Eigen::MatrixXd inner0 = initial_inner(current.argmax, {xa0, xb0}, K, config.inner_jitter,
                                                 numerics::derive_seed(seed, "inner", static_cast<std::uint64_t>(r)));
    auto objective = [&](const Eigen::VectorXd& v, Eigen::VectorXd& g) {
      const Eigen::VectorXd xa = v.head(dim);
      const Eigen::VectorXd xb = v.segment(dim, dim);
      const Eigen::MatrixXd inner = unflatten_inner(v, 2 * dim, K, dim);
      Eigen::VectorXd ga, gb;
      Eigen::MatrixXd gi;
      const double value = comp_one_shot(post, utility, quad, xa, xb, inner, &ga, &gb, &gi);
      g = -flatten({ga, gb}, gi);
      return -value;
    };
    const numerics::MinimizeResult res = numerics::adam_minimize(objective, flatten({xa0, xb0}, inner0), opt, box);
    result.restart_values.push_back(-res.value);
    if (-res.value > best) {
      best = -res.value;
      best_point = res.point;
    }
  }
  result.action = Action::compare(best_point.head(dim), best_point.segment(dim, dim), costs.c_comp);
  result.fantasy_points = unflatten_inner(best_point, 2 * dim, K, dim);
  result.voi_raw = best - current.value;
  result.voi = std::max(result.voi_raw, 0.0);
  result.voi_per_cost = result.voi / costs.c_comp;
  return result;
}

std::optional<Source> choose_source(std::optional<double> voi_eval, std::optional<double> voi_comp,
                                    const CostModel& costs, double epsilon) {
  const bool eval_small = !voi_eval || *voi_eval < epsilon;
  const bool comp_small = !voi_comp || *voi_comp < epsilon;
  if (eval_small && comp_small) return std::nullopt;
  if (!voi_comp) return Source::Evaluate;
  if (!voi_eval) return Source::Compare;
  const double pe = *voi_eval / costs.c_eval;
  const double pc = *voi_comp / costs.c_comp;
  if (std::abs(pe - pc) <= kTieTolerance * std::max(std::abs(pe), std::abs(pc))) return Source::Evaluate;
  return pe > pc ? Source::Evaluate : Source::Compare;
}

Selection select_action(const Posterior& post, const Utility& utility, const UtilityQuadrature& quad,
                        const CostModel& costs, double remaining, const AcquisitionConfig& config,
                        const DatasetUtility& current, SourceSet sources, std::uint64_t seed) {
  const bool eval_ok = sources.evaluate && costs.c_eval <= remaining;
  const bool comp_ok = sources.compare && costs.c_comp <= remaining;
  if (!eval_ok && !comp_ok) {
    throw BudgetExhausted("select_action: remaining budget " + std::to_string(remaining) + " affords no action");
  }
  Selection sel;
  if (eval_ok) sel.eval = voi_eval(post, utility, quad, costs, config, current, numerics::derive_seed(seed, "eval"));
  if (comp_ok) sel.comp = voi_comp(post, utility, quad, costs, config, current, numerics::derive_seed(seed, "comp"));

  const std::optional<Source> choice =
      choose_source(sel.eval ? std::optional<double>(sel.eval->voi) : std::nullopt,
                    sel.comp ? std::optional<double>(sel.comp->voi) : std::nullopt, costs, config.epsilon);
  if (choice) {
    sel.action = *choice == Source::Evaluate ? sel.eval->action : sel.comp->action;
    return sel;
  }

  sel.degenerate = true;
  Source cheaper;
  if (eval_ok && comp_ok) {
    cheaper = costs.c_comp < costs.c_eval ? Source::Compare : Source::Evaluate;
  } else {
    cheaper = eval_ok ? Source::Evaluate : Source::Compare;
  }
  numerics::Rng rng(numerics::derive_seed(seed, "degenerate"));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto draw = [&]() {
    Eigen::VectorXd x(post.dim());
    for (int p = 0; p < post.dim(); ++p) x(p) = unit(rng);
    return x;
  };
  if (cheaper == Source::Evaluate) {
    sel.action = Action::evaluate(draw(), costs.c_eval);
  } else {
    Eigen::VectorXd a = draw();
    sel.action = Action::compare(std::move(a), draw(), costs.c_comp);
  }
  spdlog::debug("select_action: both VoIs below epsilon, random {}", source_name(cheaper));
  return sel;
}

}  // namespace eabo
