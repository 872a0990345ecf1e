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

#include "eabo/surrogate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <spdlog/spdlog.h>

#include "eabo/errors.hpp"
#include "eabo/numerics/linalg.hpp"
#include "eabo/numerics/normal.hpp"
#include "eabo/numerics/optimize.hpp"
#include "eabo/numerics/quadrature.hpp"
#include "eabo/numerics/rng.hpp"
#include "eabo/numerics/sobol.hpp"

namespace eabo {
namespace {

constexpr double kLog2Pi = 1.8378770664093453;
constexpr double kProbitRange = 9.0;
constexpr double kProbitKinkWidth = 4.0;

bool lexicographic_less(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

void check_point(const Eigen::VectorXd& x, int dim, const char* field) {
  if (x.size() != dim) {
    throw DimensionMismatch(std::string(field) + ": point has " + std::to_string(x.size()) +
                            " coordinates, expected " + std::to_string(dim));
  }
  if (!x.allFinite()) throw ValidationError(field, "non-finite coordinate");
}

// Everything the ELBO needs from one output at the stacked data points.
struct OutputPass {
  SeKernel kernel;
  InducingFactor factor;
  Eigen::MatrixXd kzp;  // M x n_p
  Eigen::MatrixXd a;    // K^-1 Kzp
  Eigen::MatrixXd b;    // L_u^T a
  Eigen::VectorXd mean, var;
  Eigen::VectorXd cov;  // per comparison, Cov[f(x_a), f(x_b)]
  Eigen::VectorXd kab;  // per comparison, k(x_a, x_b)
};

struct StackedPoints {
  Eigen::MatrixXd points;  // n_p x d
  int n_eval = 0;
  int n_comp = 0;
  int index_a(int c) const { return n_eval + 2 * c; }
  int index_b(int c) const { return n_eval + 2 * c + 1; }
};

StackedPoints stack_points(const MixedDataset& data, int dim) {
  StackedPoints s;
  s.n_eval = static_cast<int>(data.evals.size());
  s.n_comp = static_cast<int>(data.comps.size());
  s.points.resize(s.n_eval + 2 * s.n_comp, dim);
  for (int i = 0; i < s.n_eval; ++i) s.points.row(i) = data.evals[i].x.transpose();
  for (int c = 0; c < s.n_comp; ++c) {
    s.points.row(s.index_a(c)) = data.comps[c].x_a.transpose();
    s.points.row(s.index_b(c)) = data.comps[c].x_b.transpose();
  }
  return s;
}

OutputPass output_pass(const VariationalState& state, int j, const StackedPoints& pts) {
  OutputPass pass;
  pass.kernel = SeKernel(state.kernel, j);
  pass.factor = factor_inducing(pass.kernel, state.z);
  const Eigen::Index np = pts.points.rows();
  pass.kzp = pass.kernel.matrix(state.z, pts.points);
  const auto& lk = pass.factor.lower;
  pass.a = lk.transpose().triangularView<Eigen::Upper>().solve(lk.triangularView<Eigen::Lower>().solve(pass.kzp));
  pass.b = state.l_u[j].transpose().triangularView<Eigen::Upper>() * pass.a;
  pass.mean = pass.a.transpose() * state.m_u[j];
  pass.var.resize(np);
  for (Eigen::Index p = 0; p < np; ++p) {
    pass.var(p) = pass.kernel.variance() - pass.kzp.col(p).dot(pass.a.col(p)) + pass.b.col(p).squaredNorm();
  }
  pass.cov.resize(pts.n_comp);
  pass.kab.resize(pts.n_comp);
  for (int c = 0; c < pts.n_comp; ++c) {
    const int ia = pts.index_a(c);
    const int ib = pts.index_b(c);
    pass.kab(c) = pass.kernel(pts.points.row(ia).transpose(), pts.points.row(ib).transpose());
    pass.cov(c) = pass.kab(c) - pass.kzp.col(ia).dot(pass.a.col(ib)) + pass.b.col(ia).dot(pass.b.col(ib));
  }
  return pass;
}

struct LikelihoodGradients {
  Eigen::MatrixXd g_mean;  // n_p x m
  Eigen::MatrixXd g_var;   // n_p x m
  Eigen::MatrixXd g_cov;   // n_c x m
  Eigen::VectorXd g_log_noise_eval;
  double g_log_noise_comp = 0.0;
};

// Adds each comparison's contribution; returns the sum of comparison terms.
double comparison_terms(const VariationalState& state, const MixedDataset& data, const StackedPoints& pts,
                        const std::vector<OutputPass>& passes, const Utility& utility,
                        const UtilityQuadrature& quad, LikelihoodGradients* grads) {
  const int m = state.outputs();
  const double sigma_c = state.noise_comp_std();
  const double kappa = 1.0 / (std::numbers::sqrt2 * sigma_c);
  double total = 0.0;
  PairMoments pair;
  pair.mean_a.resize(m);
  pair.mean_b.resize(m);
  pair.var_a.resize(m);
  pair.var_b.resize(m);
  pair.cov_ab.resize(m);
  for (int c = 0; c < pts.n_comp; ++c) {
    const int ia = pts.index_a(c);
    const int ib = pts.index_b(c);
    for (int j = 0; j < m; ++j) {
      pair.mean_a(j) = passes[j].mean(ia);
      pair.mean_b(j) = passes[j].mean(ib);
      pair.var_a(j) = passes[j].var(ia);
      pair.var_b(j) = passes[j].var(ib);
      pair.cov_ab(j) = passes[j].cov(c);
    }
    DeltaMomentsGradient dgrad;
    DeltaMoments delta;
    if (grads != nullptr) {
      delta = delta_moments_with_gradient(utility, pair, quad, dgrad);
    } else {
      delta = delta_moments(utility, pair, quad);
    }
    const double s = data.comps[c].d == 1 ? 1.0 : -1.0;
    const double variance = std::max(delta.variance, 0.0);
    const double a = s * kappa * delta.mean;
    const double b = kappa * std::sqrt(variance);
    const ProbitExpectation e = expected_log_probit(a, b);
    total += e.value;
    if (grads == nullptr) continue;
    const double d_mean = s * kappa * e.mills;
    const double d_var = 0.5 * kappa * kappa * e.mills_derivative;
    grads->g_log_noise_comp += -(a * e.mills + b * b * e.mills_derivative);
    for (int j = 0; j < m; ++j) {
      grads->g_mean(ia, j) += d_mean * dgrad.d_mean.mean_a(j) + d_var * dgrad.d_variance.mean_a(j);
      grads->g_mean(ib, j) += d_mean * dgrad.d_mean.mean_b(j) + d_var * dgrad.d_variance.mean_b(j);
      grads->g_var(ia, j) += d_mean * dgrad.d_mean.var_a(j) + d_var * dgrad.d_variance.var_a(j);
      grads->g_var(ib, j) += d_mean * dgrad.d_mean.var_b(j) + d_var * dgrad.d_variance.var_b(j);
      grads->g_cov(c, j) += d_mean * dgrad.d_mean.cov_ab(j) + d_var * dgrad.d_variance.cov_ab(j);
    }
  }
  return total;
}

double evaluation_terms(const VariationalState& state, const MixedDataset& data,
                        const std::vector<OutputPass>& passes, LikelihoodGradients* grads) {
  const int m = state.outputs();
  double total = 0.0;
  for (int j = 0; j < m; ++j) {
    const double log_s = state.log_noise_eval(j);
    const double inv_s2 = std::exp(-2.0 * log_s);
    for (std::size_t i = 0; i < data.evals.size(); ++i) {
      const double r = passes[j].mean(i) - data.evals[i].y(j);
      const double v = passes[j].var(i);
      const double q = (v + r * r) * inv_s2;
      total += -0.5 * (kLog2Pi + 2.0 * log_s + q);
      if (grads != nullptr) {
        grads->g_mean(i, j) += -r * inv_s2;
        grads->g_var(i, j) += -0.5 * inv_s2;
        grads->g_log_noise_eval(j) += -1.0 + q;
      }
    }
  }
  return total;
}

double kl_output(const VariationalState& state, int j, const InducingFactor& f) {
  const auto& l = state.l_u[j];
  const Eigen::Index M = l.rows();
  // tr(K^-1 S) = ||Lk^-1 L||_F^2
  const Eigen::MatrixXd v = f.lower.triangularView<Eigen::Lower>().solve(l);
  const Eigen::VectorXd w = f.lower.triangularView<Eigen::Lower>().solve(state.m_u[j]);
  double log_det_s = 0.0;
  for (Eigen::Index i = 0; i < M; ++i) log_det_s += 2.0 * std::log(l(i, i));
  return 0.5 * (v.squaredNorm() + w.squaredNorm() - static_cast<double>(M) + numerics::cholesky_log_det(f.lower) -
                log_det_s);
}

double log_prior_with_gradient(const VariationalState& state, const HyperPrior& prior, const ParameterLayout& layout,
                               Eigen::VectorXd* gradient) {
  const Eigen::VectorXd noise = state.noise_eval_std();
  const double value = log_hyperprior(state.kernel, noise, state.noise_comp_std(), prior);
  if (gradient != nullptr) {
    auto& g = *gradient;
    for (int j = 0; j < layout.outputs; ++j) {
      for (int p = 0; p < layout.dim; ++p) {
        g(layout.lengthscale_offset() + j * layout.dim + p) +=
            prior.lengthscale.d_log_density_d_log(state.kernel.lengthscale(j, p));
      }
      g(layout.outputscale_offset() + j) += prior.outputscale.d_log_density_d_log(state.kernel.outputscale(j));
      g(layout.noise_eval_offset() + j) += prior.noise.d_log_density_d_log(noise(j));
    }
    g(layout.noise_comp_offset()) += prior.noise.d_log_density_d_log(state.noise_comp_std());
  }
  return value;
}

// Gradient of sum_{ik} G_ik K(z_i, y_k) with respect to log s2, log l and Z.
void kernel_backprop(const SeKernel& kernel, const Eigen::MatrixXd& z, const Eigen::MatrixXd& y,
                     const Eigen::MatrixXd& kmat, const Eigen::MatrixXd& g, double& d_log_s2,
                     Eigen::Ref<Eigen::VectorXd> d_log_ls, Eigen::MatrixXd* d_z) {
  const Eigen::MatrixXd h = g.cwiseProduct(kmat);
  d_log_s2 += h.sum();
  for (int p = 0; p < kernel.dim(); ++p) {
    const Eigen::MatrixXd diff = z.col(p).replicate(1, y.rows()) - y.col(p).transpose().replicate(z.rows(), 1);
    const double inv = kernel.inv_sq_lengthscales()(p);
    d_log_ls(p) += h.cwiseProduct(diff.cwiseProduct(diff)).sum() * inv;
    if (d_z != nullptr) d_z->col(p) -= h.cwiseProduct(diff).rowwise().sum() * inv;
  }
}

struct ElboPass {
  ElboBreakdown breakdown;
  // Likelihood-only natural-gradient ingredients per output.
  std::vector<Eigen::VectorXd> lik_grad_m;
  std::vector<Eigen::MatrixXd> lik_grad_s;
  std::vector<InducingFactor> factors;
};

ElboPass run_elbo(const VariationalState& state, const MixedDataset& data, const Utility& utility,
                  const UtilityQuadrature& quad, const HyperPrior& prior, Eigen::VectorXd* gradient) {
  const int m = state.outputs();
  const int M = state.inducing();
  const int dim = state.dim();
  if (utility.outputs() != m) throw DimensionMismatch("elbo: utility and state disagree on the output count");
  const StackedPoints pts = stack_points(data, dim);
  std::vector<OutputPass> passes;
  passes.reserve(m);
  for (int j = 0; j < m; ++j) passes.push_back(output_pass(state, j, pts));

  const ParameterLayout layout(state);
  const bool want = gradient != nullptr;
  LikelihoodGradients lg;
  if (want) {
    gradient->setZero(layout.size());
    lg.g_mean = Eigen::MatrixXd::Zero(pts.points.rows(), m);
    lg.g_var = Eigen::MatrixXd::Zero(pts.points.rows(), m);
    lg.g_cov = Eigen::MatrixXd::Zero(pts.n_comp, m);
    lg.g_log_noise_eval = Eigen::VectorXd::Zero(m);
  }

  ElboPass out;
  auto& bd = out.breakdown;
  bd.eval_terms = evaluation_terms(state, data, passes, want ? &lg : nullptr);
  bd.comp_terms = comparison_terms(state, data, pts, passes, utility, quad, want ? &lg : nullptr);
  for (int j = 0; j < m; ++j) bd.kl += kl_output(state, j, passes[j].factor);
  bd.log_prior = log_prior_with_gradient(state, prior, layout, gradient);
  bd.total = bd.eval_terms + bd.comp_terms - bd.kl + bd.log_prior;

  for (int j = 0; j < m; ++j) out.factors.push_back(passes[j].factor);
  if (!want) return out;

  auto& g = *gradient;
  g.segment(layout.noise_eval_offset(), m) += lg.g_log_noise_eval;
  g(layout.noise_comp_offset()) += lg.g_log_noise_comp;

  Eigen::MatrixXd d_z = Eigen::MatrixXd::Zero(M, dim);
  const Eigen::Index np = pts.points.rows();
  for (int j = 0; j < m; ++j) {
    const OutputPass& pass = passes[j];
    const Eigen::MatrixXd& kinv = pass.factor.inverse;
    const Eigen::MatrixXd& l = state.l_u[j];
    const Eigen::MatrixXd s = l * l.transpose();
    const Eigen::VectorXd alpha = kinv * state.m_u[j];

    // W A^T with W = diag(g_var) plus symmetric pair couplings g_cov / 2.
    Eigen::MatrixXd wat = pass.a.transpose();
    for (Eigen::Index p = 0; p < np; ++p) wat.row(p) *= lg.g_var(p, j);
    for (int c = 0; c < pts.n_comp; ++c) {
      const double half = 0.5 * lg.g_cov(c, j);
      if (half == 0.0) continue;
      wat.row(pts.index_a(c)) += half * pass.a.col(pts.index_b(c)).transpose();
      wat.row(pts.index_b(c)) += half * pass.a.col(pts.index_a(c)).transpose();
    }
    const Eigen::VectorXd g_mean_col = lg.g_mean.col(j);
    const Eigen::MatrixXd awa = pass.a * wat;  // A W A^T
    const Eigen::VectorXd lik_m = pass.a * g_mean_col;
    out.lik_grad_m.push_back(lik_m);
    out.lik_grad_s.push_back(0.5 * (awa + awa.transpose()));
    const Eigen::MatrixXd& gs_lik = out.lik_grad_s.back();

    // q(u) parameters.
    g.segment(layout.mean_offset(j), M) = lik_m - alpha;
    const Eigen::MatrixXd linv_t =
        l.triangularView<Eigen::Lower>().solve(Eigen::MatrixXd::Identity(M, M)).transpose();
    const Eigen::MatrixXd d_l = 2.0 * gs_lik * l - kinv * l + linv_t;
    int idx = layout.chol_offset(j);
    for (int r = 0; r < M; ++r) {
      for (int c = 0; c <= r; ++c) g(idx++) = (r == c) ? d_l(r, c) * l(r, c) : d_l(r, c);
    }

    // Gradient with respect to the jittered K_ZZ.
    const Eigen::MatrixXd ks = kinv * s;
    Eigen::MatrixXd g_k = gs_lik - (gs_lik * ks.transpose() + ks * gs_lik) - (pass.a * g_mean_col) * alpha.transpose();
    g_k -= 0.5 * (kinv - ks * kinv - alpha * alpha.transpose());
    g_k = 0.5 * (g_k + g_k.transpose()).eval();

    // Gradient with respect to K_ZP.
    const Eigen::MatrixXd g_zp = alpha * g_mean_col.transpose() + 2.0 * (ks - Eigen::MatrixXd::Identity(M, M)) *
                                                                     wat.transpose();

    double d_log_s2 = 0.0;
    Eigen::VectorXd d_log_ls = Eigen::VectorXd::Zero(dim);
    // K_ZZ + jitter scales with s2, so its log-s2 derivative is the matrix itself.
    d_log_s2 += g_k.cwiseProduct(pass.factor.kzz).sum();
    {
      const Eigen::MatrixXd kzz_raw = pass.factor.kzz - pass.factor.jitter * Eigen::MatrixXd::Identity(M, M);
      double unused = 0.0;
      Eigen::MatrixXd d_z_k = Eigen::MatrixXd::Zero(M, dim);
      kernel_backprop(pass.kernel, state.z, state.z, kzz_raw, g_k, unused, d_log_ls, &d_z_k);
      d_z += 2.0 * d_z_k;
    }
    kernel_backprop(pass.kernel, state.z, pts.points, pass.kzp, g_zp, d_log_s2, d_log_ls, &d_z);
    // Direct prior-variance terms of var(x) and Cov(x_a, x_b).
    d_log_s2 += lg.g_var.col(j).sum() * pass.kernel.variance();
    for (int c = 0; c < pts.n_comp; ++c) {
      const double gk = lg.g_cov(c, j) * pass.kab(c);
      if (gk == 0.0) continue;
      d_log_s2 += gk;
      const auto diff = pts.points.row(pts.index_a(c)) - pts.points.row(pts.index_b(c));
      for (int p = 0; p < dim; ++p) d_log_ls(p) += gk * diff(p) * diff(p) * pass.kernel.inv_sq_lengthscales()(p);
    }
    g(layout.outputscale_offset() + j) += d_log_s2;
    g.segment(layout.lengthscale_offset() + j * dim, dim) += d_log_ls;
  }
  for (int i = 0; i < M; ++i) {
    for (int p = 0; p < dim; ++p) g(layout.z_offset() + i * dim + p) += d_z(i, p);
  }
  return out;
}

}  // namespace

void MixedDataset::validate(int dim, int outputs) const {
  for (std::size_t i = 0; i < evals.size(); ++i) {
    check_point(evals[i].x, dim, "evals.x");
    if (evals[i].y.size() != outputs) {
      throw DimensionMismatch("evals.y: record " + std::to_string(i) + " has " + std::to_string(evals[i].y.size()) +
                              " outputs, expected " + std::to_string(outputs));
    }
    if (!evals[i].y.allFinite()) throw ValidationError("evals.y", "non-finite observation");
  }
  for (const auto& c : comps) {
    check_point(c.x_a, dim, "comps.x_a");
    check_point(c.x_b, dim, "comps.x_b");
    if (c.d != 0 && c.d != 1) throw ValidationError("comps.d", "outcome must be 0 or 1");
    if (c.x_a == c.x_b) spdlog::warn("comparison between identical points");
  }
}

MixedDataset MixedDataset::canonical() const {
  MixedDataset out = *this;
  std::stable_sort(out.evals.begin(), out.evals.end(), [](const EvalRecord& a, const EvalRecord& b) {
    if (lexicographic_less(a.x, b.x)) return true;
    if (lexicographic_less(b.x, a.x)) return false;
    return lexicographic_less(a.y, b.y);
  });
  std::stable_sort(out.comps.begin(), out.comps.end(), [](const CompRecord& a, const CompRecord& b) {
    if (lexicographic_less(a.x_a, b.x_a)) return true;
    if (lexicographic_less(b.x_a, a.x_a)) return false;
    if (lexicographic_less(a.x_b, b.x_b)) return true;
    if (lexicographic_less(b.x_b, a.x_b)) return false;
    return a.d < b.d;
  });
  return out;
}

double VariationalState::noise_comp_std() const { return std::exp(log_noise_comp); }

void VariationalState::validate() const {
  kernel.validate();
  const int m = outputs();
  const int M = inducing();
  if (M < 1) throw DimensionMismatch("variational state: no inducing points");
  if (z.cols() != kernel.dim()) throw DimensionMismatch("variational state: Z and kernel disagree on dimension");
  if (static_cast<int>(m_u.size()) != m || static_cast<int>(l_u.size()) != m || log_noise_eval.size() != m) {
    throw DimensionMismatch("variational state: per-output blocks do not match the output count");
  }
  for (int j = 0; j < m; ++j) {
    if (m_u[j].size() != M || l_u[j].rows() != M || l_u[j].cols() != M) {
      throw DimensionMismatch("variational state: q(u) block " + std::to_string(j) + " has the wrong size");
    }
    if ((l_u[j].diagonal().array() <= 0.0).any()) {
      throw ValidationError("l_u", "Cholesky diagonal must be strictly positive");
    }
  }
  if ((z.array() < 0.0).any() || (z.array() > 1.0).any()) throw ValidationError("z", "inducing points outside [0,1]");
  if (!std::isfinite(log_noise_comp) || !log_noise_eval.allFinite()) throw ValidationError("noise", "non-finite");
}

std::uint64_t VariationalState::fingerprint() const {
  std::uint64_t h = numerics::hash_label("variational-state");
  auto mix = [&h](double v) { h = numerics::mix64(h ^ std::bit_cast<std::uint64_t>(v)); };
  auto mix_all = [&mix](const auto& mat) {
    for (Eigen::Index i = 0; i < mat.size(); ++i) mix(mat.data()[i]);
  };
  mix_all(z);
  for (const auto& v : m_u) mix_all(v);
  for (const auto& l : l_u) mix_all(l);
  mix_all(kernel.log_lengthscales);
  mix_all(kernel.log_outputscales);
  mix_all(log_noise_eval);
  mix(log_noise_comp);
  return h;
}

VariationalState VariationalState::prior(const KernelHyperparams& kernel, const Eigen::MatrixXd& z,
                                         const Eigen::VectorXd& noise_eval_std, double noise_comp_std) {
  VariationalState s;
  s.kernel = kernel;
  s.z = z;
  s.log_noise_eval = noise_eval_std.array().log();
  s.log_noise_comp = std::log(noise_comp_std);
  for (int j = 0; j < kernel.outputs(); ++j) {
    const InducingFactor f = factor_inducing(SeKernel(kernel, j), z);
    s.m_u.push_back(Eigen::VectorXd::Zero(z.rows()));
    s.l_u.push_back(f.lower);
  }
  s.validate();
  return s;
}

InducingFactor factor_inducing(const SeKernel& kernel, const Eigen::MatrixXd& z) {
  InducingFactor f;
  const Eigen::MatrixXd kzz = kernel.matrix(z, z);
  std::vector<double> ladder;
  for (double rel : inducing_jitter_ladder()) ladder.push_back(rel * kernel.variance());
  numerics::JitteredCholesky chol = numerics::cholesky_with_jitter(kzz, ladder);
  f.jitter = chol.jitter;
  f.kzz = kzz;
  f.kzz.diagonal().array() += f.jitter;
  f.lower = std::move(chol.lower);
  f.inverse = numerics::cholesky_inverse(f.lower);
  return f;
}

Posterior::Posterior(VariationalState state) : state_(std::move(state)) {
  state_.validate();
  for (int j = 0; j < outputs(); ++j) {
    kernels_.emplace_back(state_.kernel, j);
    factors_.push_back(factor_inducing(kernels_.back(), state_.z));
    const Eigen::MatrixXd& kinv = factors_.back().inverse;
    alpha_.push_back(kinv * state_.m_u[j]);
    const Eigen::MatrixXd kl = kinv * state_.l_u[j];
    correction_.push_back(kinv - kl * kl.transpose());
  }
}

Eigen::VectorXd Posterior::noise_eval_variance() const { return (2.0 * state_.log_noise_eval).array().exp(); }

PointFeatures Posterior::features(const Eigen::Ref<const Eigen::VectorXd>& x, bool with_jacobian) const {
  if (x.size() != dim()) throw DimensionMismatch("Posterior::features: wrong point dimension");
  PointFeatures f;
  f.x = x;
  const int m = outputs();
  f.mean.resize(m);
  f.variance.resize(m);
  f.k.reserve(m);
  f.ck.reserve(m);
  for (int j = 0; j < m; ++j) {
    f.k.push_back(kernels_[j].row(x, state_.z));
    f.ck.push_back(correction_[j] * f.k.back());
    f.mean(j) = f.k.back().dot(alpha_[j]);
    f.variance(j) = std::max(kernels_[j].variance() - f.k.back().dot(f.ck.back()), 0.0);
    if (with_jacobian) f.jac.push_back(kernels_[j].row_jacobian(x, state_.z, f.k.back()));
  }
  return f;
}

double Posterior::covariance(int j, const PointFeatures& a, const PointFeatures& b) const {
  return kernels_[j](a.x, b.x) - a.k[j].dot(b.ck[j]);
}

Eigen::VectorXd Posterior::covariance_grad_a(int j, const PointFeatures& a, const PointFeatures& b) const {
  const double kab = kernels_[j](a.x, b.x);
  const Eigen::VectorXd direct =
      -kab * (a.x - b.x).cwiseProduct(kernels_[j].inv_sq_lengthscales());
  return direct - a.jac[j].transpose() * b.ck[j];
}

Eigen::VectorXd Posterior::mean_grad(int j, const PointFeatures& f) const { return f.jac[j].transpose() * alpha_[j]; }

Eigen::VectorXd Posterior::variance_grad(int j, const PointFeatures& f) const {
  return -2.0 * f.jac[j].transpose() * f.ck[j];
}

Eigen::VectorXd Posterior::mean(const Eigen::Ref<const Eigen::VectorXd>& x) const { return features(x).mean; }

Eigen::VectorXd Posterior::variance(const Eigen::Ref<const Eigen::VectorXd>& x) const { return features(x).variance; }

PairMoments Posterior::pair_moments(const PointFeatures& a, const PointFeatures& b) const {
  const int m = outputs();
  PairMoments p{a.mean, b.mean, a.variance, b.variance, Eigen::VectorXd(m)};
  for (int j = 0; j < m; ++j) p.cov_ab(j) = covariance(j, a, b);
  return p;
}

PosteriorMoments Posterior::predict(const Eigen::MatrixXd& x) const {
  if (x.cols() != dim()) throw DimensionMismatch("predict: query points have the wrong dimension");
  PosteriorMoments out;
  out.mean.resize(x.rows(), outputs());
  for (int j = 0; j < outputs(); ++j) {
    const Eigen::MatrixXd kzx = kernels_[j].matrix(state_.z, x);
    out.mean.col(j) = kzx.transpose() * alpha_[j];
    Eigen::MatrixXd cov = kernels_[j].matrix(x, x) - kzx.transpose() * correction_[j] * kzx;
    out.covariance.push_back(0.5 * (cov + cov.transpose()));
  }
  return out;
}

PosteriorMoments predict(const VariationalState& state, const Eigen::MatrixXd& x) { return Posterior(state).predict(x); }

ProbitExpectation expected_log_probit(double a, double b) {
  ProbitExpectation out;
  b = std::abs(b);
  if (!(b > 1e-12)) {
    out.value = numerics::log_normal_cdf(a);
    out.mills = numerics::mills_ratio(a);
    out.mills_derivative = numerics::mills_ratio_derivative(a);
    return out;
  }
  static const numerics::QuadratureRule panel = numerics::gauss_legendre(kProbitPanelOrder);
  double breaks[5];
  int nb = 0;
  breaks[nb++] = -kProbitRange;
  const double z0 = -a / b;
  const double width = kProbitKinkWidth / b;
  for (double p : {z0 - width, z0, z0 + width}) {
    if (p > -kProbitRange && p < kProbitRange) breaks[nb++] = p;
  }
  breaks[nb++] = kProbitRange;
  const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (int seg = 0; seg + 1 < nb; ++seg) {
    const double lo = breaks[seg];
    const double hi = breaks[seg + 1];
    const double half = 0.5 * (hi - lo);
    const double mid = 0.5 * (hi + lo);
    for (int k = 0; k < panel.order; ++k) {
      const double z = mid + half * panel.nodes[k];
      const double w = half * panel.weights[k] * inv_sqrt_2pi * std::exp(-0.5 * z * z);
      const double t = a + b * z;
      const double lambda = numerics::mills_ratio(t);
      out.value += w * numerics::log_normal_cdf(t);
      out.mills += w * lambda;
      out.mills_derivative += w * (-lambda * (t + lambda));
    }
  }
  return out;
}

double comparison_expectation(double mean, double variance, double sigma_comp, int d) {
  const double kappa = 1.0 / (std::numbers::sqrt2 * sigma_comp);
  const double s = d == 1 ? 1.0 : -1.0;
  return expected_log_probit(s * kappa * mean, kappa * std::sqrt(std::max(variance, 0.0))).value;
}

double elbo_eval_term(const VariationalState& state, const EvalRecord& record) {
  const Posterior post(state);
  const PointFeatures f = post.features(record.x);
  if (record.y.size() != state.outputs()) throw DimensionMismatch("elbo_eval_term: wrong output count");
  double total = 0.0;
  for (int j = 0; j < state.outputs(); ++j) {
    const double log_s = state.log_noise_eval(j);
    const double r = f.mean(j) - record.y(j);
    total += -0.5 * (kLog2Pi + 2.0 * log_s + (f.variance(j) + r * r) * std::exp(-2.0 * log_s));
  }
  return total;
}

double elbo_comp_term(const VariationalState& state, const CompRecord& record, const Utility& utility,
                      const UtilityQuadrature& quad) {
  const Posterior post(state);
  const PointFeatures fa = post.features(record.x_a);
  const PointFeatures fb = post.features(record.x_b);
  const DeltaMoments delta = delta_moments(utility, post.pair_moments(fa, fb), quad);
  return comparison_expectation(delta.mean, delta.variance, state.noise_comp_std(), record.d);
}

double elbo_kl_term(const VariationalState& state) {
  state.validate();
  double total = 0.0;
  for (int j = 0; j < state.outputs(); ++j) {
    total += kl_output(state, j, factor_inducing(SeKernel(state.kernel, j), state.z));
  }
  return total;
}

ParameterLayout::ParameterLayout(const VariationalState& state)
    : inducing(state.inducing()), dim(state.dim()), outputs(state.outputs()) {}

Eigen::VectorXd pack_parameters(const VariationalState& state) {
  const ParameterLayout layout(state);
  Eigen::VectorXd theta(layout.size());
  for (int i = 0; i < layout.inducing; ++i) {
    for (int p = 0; p < layout.dim; ++p) theta(layout.z_offset() + i * layout.dim + p) = state.z(i, p);
  }
  for (int j = 0; j < layout.outputs; ++j) {
    for (int p = 0; p < layout.dim; ++p) {
      theta(layout.lengthscale_offset() + j * layout.dim + p) = state.kernel.log_lengthscales(j, p);
    }
    theta(layout.outputscale_offset() + j) = state.kernel.log_outputscales(j);
    theta(layout.noise_eval_offset() + j) = state.log_noise_eval(j);
  }
  theta(layout.noise_comp_offset()) = state.log_noise_comp;
  for (int j = 0; j < layout.outputs; ++j) {
    theta.segment(layout.mean_offset(j), layout.inducing) = state.m_u[j];
    int idx = layout.chol_offset(j);
    const auto& l = state.l_u[j];
    for (int r = 0; r < layout.inducing; ++r) {
      for (int c = 0; c <= r; ++c) theta(idx++) = (r == c) ? std::log(l(r, c)) : l(r, c);
    }
  }
  return theta;
}

VariationalState unpack_parameters(const Eigen::VectorXd& theta, const VariationalState& like) {
  const ParameterLayout layout(like);
  if (theta.size() != layout.size()) throw DimensionMismatch("unpack_parameters: wrong parameter count");
  VariationalState s = like;
  for (int i = 0; i < layout.inducing; ++i) {
    for (int p = 0; p < layout.dim; ++p) s.z(i, p) = theta(layout.z_offset() + i * layout.dim + p);
  }
  for (int j = 0; j < layout.outputs; ++j) {
    for (int p = 0; p < layout.dim; ++p) {
      s.kernel.log_lengthscales(j, p) = theta(layout.lengthscale_offset() + j * layout.dim + p);
    }
    s.kernel.log_outputscales(j) = theta(layout.outputscale_offset() + j);
    s.log_noise_eval(j) = theta(layout.noise_eval_offset() + j);
  }
  s.log_noise_comp = theta(layout.noise_comp_offset());
  for (int j = 0; j < layout.outputs; ++j) {
    s.m_u[j] = theta.segment(layout.mean_offset(j), layout.inducing);
    int idx = layout.chol_offset(j);
    auto& l = s.l_u[j];
    l.setZero(layout.inducing, layout.inducing);
    for (int r = 0; r < layout.inducing; ++r) {
      for (int c = 0; c <= r; ++c) {
        const double v = theta(idx++);
        l(r, c) = (r == c) ? std::exp(v) : v;
      }
    }
  }
  return s;
}

ElboBreakdown elbo(const VariationalState& state, const MixedDataset& data, const Utility& utility,
                   const UtilityQuadrature& quad, const HyperPrior& prior) {
  state.validate();
  data.validate(state.dim(), state.outputs());
  return run_elbo(state, data, utility, quad, prior, nullptr).breakdown;
}

ElboBreakdown elbo_with_gradient(const VariationalState& state, const MixedDataset& data, const Utility& utility,
                                 const UtilityQuadrature& quad, Eigen::VectorXd& gradient, const HyperPrior& prior) {
  state.validate();
  data.validate(state.dim(), state.outputs());
  return run_elbo(state, data, utility, quad, prior, &gradient).breakdown;
}

int FitConfig::inducing_count(int dim) const { return inducing > 0 ? inducing : std::min(64, 10 * dim + 10); }

namespace {

VariationalState cold_start(const MixedDataset& data, int dim, int outputs, const FitConfig& config,
                            std::uint64_t seed) {
  const int M = config.inducing_count(dim);
  const Eigen::MatrixXd z = numerics::sobol_points(M, dim, numerics::derive_seed(seed, "inducing"));
  const KernelHyperparams kernel =
      KernelHyperparams::constant(outputs, dim, config.init_lengthscale, config.init_outputscale);
  (void)data;
  return VariationalState::prior(kernel, z, Eigen::VectorXd::Constant(outputs, config.noise_eval_std),
                                 config.noise_comp_std);
}

// One damped natural-gradient step on q(u) of every output. The step is
// halved while the new precision fails to factor; an output whose precision
// never factors keeps its current q(u).
void natural_step(VariationalState& state, const ElboPass& pass, double rho) {
  const int M = state.inducing();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(M, M);
  for (int j = 0; j < state.outputs(); ++j) {
    const auto& l = state.l_u[j];
    const Eigen::MatrixXd l_inv = l.triangularView<Eigen::Lower>().solve(eye);
    const Eigen::MatrixXd prec = l_inv.transpose() * l_inv;
    const Eigen::VectorXd h = prec * state.m_u[j];
    const Eigen::MatrixXd& gs = pass.lik_grad_s[j];
    const Eigen::MatrixXd target_prec = pass.factors[j].inverse - 2.0 * gs;
    const Eigen::VectorXd target_h = pass.lik_grad_m[j] - 2.0 * gs * state.m_u[j];
    for (double step = rho; step > rho / 16.0; step *= 0.5) {
      Eigen::MatrixXd new_prec = (1.0 - step) * prec + step * target_prec;
      new_prec = 0.5 * (new_prec + new_prec.transpose()).eval();
      Eigen::LLT<Eigen::MatrixXd> llt(new_prec);
      if (llt.info() != Eigen::Success) continue;
      const Eigen::MatrixXd lp = llt.matrixL();
      if ((lp.diagonal().array() <= 0.0).any() || !lp.allFinite()) continue;
      const Eigen::VectorXd new_h = (1.0 - step) * h + step * target_h;
      // S = Lp^-T Lp^-1; its Cholesky factor is recovered from the reversed factorization.
      const Eigen::MatrixXd lp_inv = lp.triangularView<Eigen::Lower>().solve(eye);
      Eigen::MatrixXd cov = lp_inv.transpose() * lp_inv;
      cov = 0.5 * (cov + cov.transpose()).eval();
      Eigen::LLT<Eigen::MatrixXd> cov_llt(cov);
      if (cov_llt.info() != Eigen::Success) continue;
      Eigen::MatrixXd new_l = cov_llt.matrixL();
      if ((new_l.diagonal().array() <= 0.0).any() || !new_l.allFinite()) continue;
      state.m_u[j] = cov * new_h;
      state.l_u[j] = std::move(new_l);
      break;
    }
  }
}

}  // namespace

FitResult fit(const MixedDataset& data_in, const Utility& utility, int dim, const FitConfig& config,
              const std::optional<VariationalState>& warm_start, std::uint64_t seed) {
  const int outputs = utility.outputs();
  data_in.validate(dim, outputs);
  const MixedDataset data = data_in.canonical();
  const UtilityQuadrature quad = UtilityQuadrature::for_outputs(outputs);

  FitResult result;
  VariationalState state;
  if (warm_start) {
    state = *warm_start;
    state.validate();
    if (state.dim() != dim || state.outputs() != outputs) {
      throw DimensionMismatch("fit: warm start has the wrong shape");
    }
    result.warm_start_fingerprint = state.fingerprint();
  } else {
    state = cold_start(data, dim, outputs, config, seed);
  }
  if (!config.learn_noise_eval) state.log_noise_eval.setConstant(std::log(config.noise_eval_std));
  if (!config.learn_noise_comp) state.log_noise_comp = std::log(config.noise_comp_std);

  const ParameterLayout layout(state);
  const int steps = warm_start ? config.warm_steps : config.cold_steps;
  numerics::OptimizerConfig adam_config;
  adam_config.learning_rate = config.learning_rate;
  adam_config.steps = steps;
  numerics::AdamState adam(layout.hyper_end(), adam_config);

  Eigen::VectorXd gradient;
  double best_value = -std::numeric_limits<double>::infinity();
  for (int step = 0; step <= steps; ++step) {
    const ElboPass pass = run_elbo(state, data, utility, quad, config.prior, &gradient);
    const double value = pass.breakdown.total;
    if (!std::isfinite(value) || !gradient.allFinite()) {
      throw NonFiniteObjective("fit: non-finite ELBO at step " + std::to_string(step));
    }
    if (step == 0) result.initial_elbo = value;
    if (value > best_value) {
      best_value = value;
      result.state = state;
      result.elbo = value;
      result.best_step = step;
    }
    if (step == steps) break;

    // Hyperparameters and Z: Adam ascent on the gradient, with pinned groups masked.
    Eigen::VectorXd hyper = pack_parameters(state).head(layout.hyper_end());
    Eigen::VectorXd descent = -gradient.head(layout.hyper_end());
    if (!config.learn_inducing) descent.segment(layout.z_offset(), layout.inducing * layout.dim).setZero();
    if (!config.learn_kernel) {
      descent.segment(layout.lengthscale_offset(), layout.outputs * (layout.dim + 1)).setZero();
    }
    if (!config.learn_noise_eval) descent.segment(layout.noise_eval_offset(), layout.outputs).setZero();
    if (!config.learn_noise_comp) descent(layout.noise_comp_offset()) = 0.0;

    natural_step(state, pass, config.natural_step);

    adam.step(hyper, descent);
    Eigen::VectorXd theta = pack_parameters(state);
    theta.head(layout.hyper_end()) = hyper;
    state = unpack_parameters(theta, state);
    state.z = state.z.cwiseMax(0.0).cwiseMin(1.0);
  }
  spdlog::debug("fit: elbo {:.6f} -> {:.6f} (best step {})", result.initial_elbo, result.elbo, result.best_step);
  return result;
}

}  // namespace eabo
