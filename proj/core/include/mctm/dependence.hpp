#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mctm/estimation.hpp"

namespace mctm {

/// Sigma = Lambda^-1 Lambda^-T for unit lower-triangular Lambda.
Eigen::MatrixXd sigma_from_lambda(const Eigen::MatrixXd& lambda);
/// diag(Sigma)^-1/2 Sigma diag(Sigma)^-1/2. Throws InputError if not PD.
Eigen::MatrixXd corr_from_sigma(const Eigen::MatrixXd& sigma);
/// Gaussian-copula rank correlation (6 / pi) asin(rho / 2).
double spearman_from_corr(double rho);
Eigen::MatrixXd spearman_from_corr(const Eigen::MatrixXd& corr);

struct PairSummary {
  int row = 1;
  int col = 0;
  double lambda = 0.0, lambda_lo = 0.0, lambda_hi = 0.0;
  double corr = 0.0, corr_lo = 0.0, corr_hi = 0.0;
  double spearman = 0.0, spearman_lo = 0.0, spearman_hi = 0.0;
};

struct DependenceSummary {
  Eigen::MatrixXd lambda;
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd corr;
  Eigen::MatrixXd spearman;
  double ci_level = 0.95;
  std::vector<PairSummary> pairs;
  std::optional<double> evaluated_at;  // day of year for covariate-dependent models
};

/// Monte Carlo propagation of the asymptotic parameter distribution: draws
/// from N(theta_hat, vcov) restricted to the dependence block, transformed,
/// summarized by empirical quantiles.
struct PropagationConfig {
  double level = 0.95;
  int draws = 10000;
  std::uint64_t seed = 20210617;
};

DependenceSummary summarize_dependence(const FitResult& fit, std::optional<double> day = std::nullopt,
                                       const PropagationConfig& config = {});

struct TrajectoryPoint {
  double day = 1.0;
  double spearman = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

/// Spearman correlation of a species pair over days, with propagated CIs.
std::vector<TrajectoryPoint> trajectory(const FitResult& fit, SpeciesPair pair, const std::vector<double>& days,
                                        const PropagationConfig& config = {});

struct PermutationFit {
  std::vector<int> order;           // fitted species order, as indices into the input
  bool ok = false;
  std::string error;
  double loglik = 0.0;
  bool converged = false;
  /// Spearman matrices mapped back to the input species order; one per
  /// evaluation day (a single matrix for constant-lambda models).
  std::vector<Eigen::MatrixXd> spearman;
};

struct PermutationReport {
  std::vector<PermutationFit> fits;
  double max_discrepancy = 0.0;     // max |rho_S difference| over permutations, pairs and days
  int best = -1;                    // index of the likelihood-maximizing ordering
  double threshold = 0.05;
  bool order_sensitive = false;
  std::vector<double> days;
};

struct PermutationOptions {
  double threshold = 0.05;
  int max_species = 4;
  bool allow_more_species = false;
  std::vector<double> days;         // evaluation days for covariate models; default 1..365
};

PermutationReport permutation_sensitivity(const ObservationTable& data, const ModelSpec& spec,
                                          LikelihoodKind kind, const FitOptions& fit_options = {},
                                          const PermutationOptions& options = {});

}  // namespace mctm
