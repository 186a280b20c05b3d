#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "mctm/likelihood.hpp"
#include "mctm/model.hpp"
#include "mctm/observations.hpp"
#include "mctm/optimizer.hpp"

namespace mctm {

struct FitOptions {
  OptimizerConfig optimizer;
  double hessian_step = 1e-4;   // relative central-difference step
  bool compute_vcov = true;
  /// Packed starting point. When absent, each marginal is first fitted on
  /// its own (interval-censored univariate likelihood) and Lambda starts at
  /// the identity.
  std::optional<Eigen::VectorXd> start;
  int threads = 0;
};

struct FitResult {
  ModelSpec spec;
  LikelihoodKind kind = LikelihoodKind::DiscreteApprox;
  Eigen::VectorXd theta_hat;  // packed, constrained space
  double loglik = 0.0;
  double loglik_start = 0.0;
  Eigen::MatrixXd vcov;       // packed space
  bool hessian_pd = false;
  int iterations = 0;
  bool converged = false;
  double gradient_norm = 0.0; // max-norm in the optimizer's space
  std::string message;
  std::size_t n_obs = 0;
  std::size_t floored_cells = 0;

  JointModel model() const { return JointModel::from_packed(spec, theta_hat); }
  int n_params() const { return static_cast<int>(theta_hat.size()); }
};

/// Joint maximum-likelihood fit with a continuous or discrete approximation.
/// Never throws on non-convergence: the result carries converged = false.
FitResult fit(const ObservationTable& data, const ModelSpec& spec, LikelihoodKind kind,
              const FitOptions& options = {});

/// Univariate interval-censored fit of one species, returned as a J = 1 fit.
FitResult fit_marginal(const ObservationTable& data, const ModelSpec& spec, int species,
                       const FitOptions& options = {});

/// Packed constant-Lambda parameters embedded into the covariate-dependent
/// layout with zeta = 0 (identical likelihood).
Eigen::VectorXd embed_constant_lambda(const ModelSpec& constant_spec, const Eigen::VectorXd& theta);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

Interval wald_ci(const FitResult& fit, int param_index, double level = 0.95);

struct LrTestResult {
  double statistic = 0.0;
  int df = 0;
  double p_value = 1.0;
  std::string warning;  // set when the alternative fits worse than the null
};

LrTestResult lr_test(const FitResult& fit_null, const FitResult& fit_alt);
LrTestResult lr_test(double loglik_null, double loglik_alt, int df);

/// Upper-tail chi-squared probability.
double chi_squared_upper(double statistic, int df);

}  // namespace mctm
