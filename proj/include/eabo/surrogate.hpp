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

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <vector>

#include "eabo/kernel.hpp"
#include "eabo/utility.hpp"

namespace eabo {

struct EvalRecord {
  Eigen::VectorXd x;  ///< point in [0,1]^d
  Eigen::VectorXd y;  ///< observed outputs, standardized units
};

struct CompRecord {
  Eigen::VectorXd x_a;
  Eigen::VectorXd x_b;
  int d = 1;  ///< 1 when x_a was preferred
};

struct MixedDataset {
  std::vector<EvalRecord> evals;
  std::vector<CompRecord> comps;

  bool empty() const { return evals.empty() && comps.empty(); }
  /// Throws DimensionMismatch / ValidationError on malformed records.
  void validate(int dim, int outputs) const;
  /// Records sorted lexicographically; fitting always runs on this order.
  MixedDataset canonical() const;
};

/// q(u) per output over shared inducing locations, plus hyperparameters.
struct VariationalState {
  Eigen::MatrixXd z;                  ///< M x d
  std::vector<Eigen::VectorXd> m_u;   ///< per output, M
  std::vector<Eigen::MatrixXd> l_u;   ///< per output, M x M lower triangular
  KernelHyperparams kernel;
  Eigen::VectorXd log_noise_eval;     ///< log std per output
  double log_noise_comp = 0.0;        ///< log std

  int inducing() const { return static_cast<int>(z.rows()); }
  int dim() const { return static_cast<int>(z.cols()); }
  int outputs() const { return kernel.outputs(); }
  Eigen::VectorXd noise_eval_std() const { return log_noise_eval.array().exp(); }
  double noise_comp_std() const;

  void validate() const;
  /// 64-bit hash of every parameter's bit pattern.
  std::uint64_t fingerprint() const;

  /// m_u = 0 and S_u = K_ZZ (jittered) for every output.
  static VariationalState prior(const KernelHyperparams& kernel, const Eigen::MatrixXd& z,
                                const Eigen::VectorXd& noise_eval_std, double noise_comp_std);
};

/// Relative jitter ladder for K_ZZ; entries are multiplied by the output-scale.
inline const std::vector<double>& inducing_jitter_ladder() {
  static const std::vector<double> ladder{1e-6, 1e-4, 1e-2};
  return ladder;
}

/// Factorization of the jittered K_ZZ of one output.
struct InducingFactor {
  Eigen::MatrixXd kzz;      ///< K_ZZ + jitter I
  Eigen::MatrixXd lower;    ///< Cholesky factor of kzz
  Eigen::MatrixXd inverse;  ///< kzz^-1
  double jitter = 0.0;      ///< absolute jitter added to the diagonal
};

InducingFactor factor_inducing(const SeKernel& kernel, const Eigen::MatrixXd& z);

/// Posterior mean and per-output covariance at query points.
struct PosteriorMoments {
  Eigen::MatrixXd mean;                     ///< n x m
  std::vector<Eigen::MatrixXd> covariance;  ///< per output, n x n
};

/// Kernel row and derived quantities of one point, per output.
struct PointFeatures {
  Eigen::VectorXd x;
  std::vector<Eigen::VectorXd> k;    ///< k_j(x, Z)
  std::vector<Eigen::VectorXd> ck;   ///< C_j k_j(x, Z)
  std::vector<Eigen::MatrixXd> jac;  ///< d k_j(x, Z) / dx, M x d (empty unless requested)
  Eigen::VectorXd mean;              ///< m
  Eigen::VectorXd variance;          ///< m
};

/// Predictive distribution of a VariationalState. Immutable after
/// construction; every query is const and thread-safe.
class Posterior {
 public:
  explicit Posterior(VariationalState state);

  const VariationalState& state() const { return state_; }
  int outputs() const { return state_.outputs(); }
  int dim() const { return state_.dim(); }
  int inducing() const { return state_.inducing(); }

  const SeKernel& kernel(int j) const { return kernels_[j]; }
  const InducingFactor& factor(int j) const { return factors_[j]; }
  /// K_ZZ^-1 m_u.
  const Eigen::VectorXd& alpha(int j) const { return alpha_[j]; }
  /// K_ZZ^-1 - K_ZZ^-1 S_u K_ZZ^-1.
  const Eigen::MatrixXd& correction(int j) const { return correction_[j]; }
  Eigen::VectorXd noise_eval_variance() const;
  double noise_comp_std() const { return state_.noise_comp_std(); }

  PointFeatures features(const Eigen::Ref<const Eigen::VectorXd>& x, bool with_jacobian = false) const;
  /// Cov[f_j(a), f_j(b)] from two feature sets.
  double covariance(int j, const PointFeatures& a, const PointFeatures& b) const;
  /// d Cov[f_j(a), f_j(b)] / d a (requires a.jac).
  Eigen::VectorXd covariance_grad_a(int j, const PointFeatures& a, const PointFeatures& b) const;
  /// d mean_j / dx (requires jac).
  Eigen::VectorXd mean_grad(int j, const PointFeatures& f) const;
  /// d variance_j / dx (requires jac).
  Eigen::VectorXd variance_grad(int j, const PointFeatures& f) const;

  Eigen::VectorXd mean(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  Eigen::VectorXd variance(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  PairMoments pair_moments(const PointFeatures& a, const PointFeatures& b) const;

  /// Per output: mean = K_xZ K_ZZ^-1 m_u, covariance = K_xx - K_xZ C K_Zx.
  PosteriorMoments predict(const Eigen::MatrixXd& x) const;

 private:
  VariationalState state_;
  std::vector<SeKernel> kernels_;
  std::vector<InducingFactor> factors_;
  std::vector<Eigen::VectorXd> alpha_;
  std::vector<Eigen::MatrixXd> correction_;
};

PosteriorMoments predict(const VariationalState& state, const Eigen::MatrixXd& x);

/// E[log Phi(a + b Z)], Z ~ N(0, 1), with E[lambda(a + b Z)] and
/// E[lambda'(a + b Z)] where lambda is the Mills ratio.
struct ProbitExpectation {
  double value = 0.0;
  double mills = 0.0;
  double mills_derivative = 0.0;
};

/// Piecewise Gauss-Legendre in z on [-9, 9], refined around the kink a + b z = 0.
ProbitExpectation expected_log_probit(double a, double b);

/// Order of each Gauss-Legendre panel used by expected_log_probit.
inline constexpr int kProbitPanelOrder = 32;

/// E_{Delta ~ N(mean, variance)}[log Phi(s Delta / (sqrt(2) sigma_comp))], s = 2d - 1.
double comparison_expectation(double mean, double variance, double sigma_comp, int d);

double elbo_eval_term(const VariationalState& state, const EvalRecord& record);
double elbo_comp_term(const VariationalState& state, const CompRecord& record, const Utility& utility,
                      const UtilityQuadrature& quad);
double elbo_kl_term(const VariationalState& state);

/// Flat vector of unconstrained parameters: Z (row-major), log lengthscales
/// (row-major), log output-scales, log eval noise, log comp noise, then per
/// output m_u and the packed lower triangle of L_u (row-major, log diagonal).
struct ParameterLayout {
  int inducing = 0, dim = 0, outputs = 0;

  explicit ParameterLayout(const VariationalState& state);
  int z_offset() const { return 0; }
  int lengthscale_offset() const { return inducing * dim; }
  int outputscale_offset() const { return lengthscale_offset() + outputs * dim; }
  int noise_eval_offset() const { return outputscale_offset() + outputs; }
  int noise_comp_offset() const { return noise_eval_offset() + outputs; }
  int hyper_end() const { return noise_comp_offset() + 1; }
  int variational_size() const { return inducing + inducing * (inducing + 1) / 2; }
  int mean_offset(int j) const { return hyper_end() + j * variational_size(); }
  int chol_offset(int j) const { return mean_offset(j) + inducing; }
  int size() const { return hyper_end() + outputs * variational_size(); }
};

Eigen::VectorXd pack_parameters(const VariationalState& state);
VariationalState unpack_parameters(const Eigen::VectorXd& theta, const VariationalState& like);

struct ElboBreakdown {
  double total = 0.0;
  double eval_terms = 0.0;
  double comp_terms = 0.0;
  double kl = 0.0;
  double log_prior = 0.0;
};

/// Sum of eval and comparison terms minus KL plus the log hyperprior.
ElboBreakdown elbo(const VariationalState& state, const MixedDataset& data, const Utility& utility,
                   const UtilityQuadrature& quad, const HyperPrior& prior = {});

/// elbo() and its gradient with respect to pack_parameters(state).
ElboBreakdown elbo_with_gradient(const VariationalState& state, const MixedDataset& data, const Utility& utility,
                                 const UtilityQuadrature& quad, Eigen::VectorXd& gradient,
                                 const HyperPrior& prior = {});

struct FitConfig {
  int inducing = 0;  ///< 0 selects min(64, 10 d + 10)
  double learning_rate = 0.01;
  int cold_steps = 500;
  int warm_steps = 200;
  /// Step size of the natural-gradient update applied to q(u) each iteration.
  double natural_step = 0.5;
  double init_lengthscale = 1.0 / 3.0;
  double init_outputscale = 1.0;
  double noise_eval_std = 0.2;  ///< initial value, or the pinned value
  double noise_comp_std = 0.2;
  bool learn_noise_eval = true;
  bool learn_noise_comp = true;
  bool learn_inducing = true;
  bool learn_kernel = true;
  HyperPrior prior;

  int inducing_count(int dim) const;
};

struct FitResult {
  VariationalState state;
  double elbo = 0.0;          ///< at the returned state
  double initial_elbo = 0.0;  ///< at the starting state
  int best_step = 0;
  std::uint64_t warm_start_fingerprint = 0;  ///< 0 for cold starts
};

/// Maximizes the ELBO. q(u) follows natural-gradient steps while Z, the
/// kernel and the noises follow Adam; the best visited state is returned.
FitResult fit(const MixedDataset& data, const Utility& utility, int dim, const FitConfig& config,
              const std::optional<VariationalState>& warm_start, std::uint64_t seed);

}  // namespace eabo
