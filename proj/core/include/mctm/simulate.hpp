#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mctm/dependence.hpp"
#include "mctm/estimation.hpp"
#include "mctm/model.hpp"
#include "mctm/mvn_rectangle.hpp"
#include "mctm/observations.hpp"
#include "mctm/rng.hpp"

namespace mctm {

/// One joint draw at x: Z ~ N(0, Lambda(x)^-1 Lambda(x)^-T), then per species
/// the smallest count y with alpha_j(y) - eta_j(x) >= Z_j. Draws beyond the
/// support return its maximum and bump *truncations.
std::vector<int> sample_counts(const JointModel& model, const Covariates& x, RandomStream& rng,
                               std::size_t* truncations = nullptr);

/// Simulated table at the given covariate rows (days must be integers).
/// Rows are drawn in order from stream (seed, stream).
ObservationTable simulate_table(const JointModel& model, const std::vector<Covariates>& rows,
                                std::uint64_t seed, std::uint64_t stream = 0,
                                std::size_t* truncations = nullptr);

struct SimulationConfig {
  int n_replicates = 100;
  std::uint64_t seed = 1;
  /// Replicate r draws from stream r of the seed.
  std::vector<Covariates> covariate_schedule;
};

struct BootstrapOptions {
  FitOptions fit;
  PropagationConfig propagation;
  /// Days at which covariate-dependent refits report Spearman trajectories.
  std::vector<double> trajectory_days;
  /// Replicates run concurrently; 0 reads MCTM_THREADS.
  int threads = 0;
  /// Start each refit at the generating parameters instead of marginal fits.
  bool warm_start = true;
};

struct BootstrapReplicate {
  int index = 0;
  bool ok = false;
  std::string error;
  bool converged = false;
  double loglik = 0.0;
  std::size_t truncations = 0;
  /// Per pair (pair order): Spearman estimate and its propagated interval.
  /// For covariate-dependent models these are evaluated at the first
  /// trajectory day.
  Eigen::VectorXd spearman, spearman_lo, spearman_hi;
  /// Covariate-dependent models: pairs x days Spearman trajectories.
  Eigen::MatrixXd trajectories;
};

struct PairQuantiles {
  int row = 1;
  int col = 0;
  double truth = 0.0;
  double q025 = 0.0, q25 = 0.0, median = 0.0, q75 = 0.0, q975 = 0.0;
  double mean = 0.0;
  /// Share of successful replicates whose interval contains the truth.
  double coverage = 0.0;
};

struct BootstrapReport {
  std::vector<BootstrapReplicate> replicates;
  std::vector<PairQuantiles> pairs;
  std::vector<double> trajectory_days;
  Eigen::MatrixXd truth_trajectories;  // pairs x days
  int failures = 0;
};

/// Parametric bootstrap: simulate each replicate at the schedule, refit the
/// same spec, record Spearman correlations. Failures are recorded per
/// replicate; the run continues.
BootstrapReport parametric_bootstrap(const FitResult& fit, const SimulationConfig& config,
                                     const BootstrapOptions& options = {});

struct ApproxComparisonRow {
  int sample = 0;
  LikelihoodKind kind = LikelihoodKind::DiscreteApprox;
  bool ok = false;
  std::string error;
  double approx_loglik = 0.0;
  double exact_loglik = 0.0;
};

struct ApproxComparison {
  std::vector<ApproxComparisonRow> rows;
  /// One-sided rank test that |approx - exact| is smaller for the discrete
  /// approximation than for the continuous one.
  double rank_statistic = 0.0;
  double p_value = 1.0;
};

/// Samples n_samples tables from each fitted model at the schedule and
/// evaluates that model's approximate and exact log-likelihoods at the
/// generating parameters. J <= 3.
ApproxComparison compare_approximations(const FitResult& fit_continuous, const FitResult& fit_discrete,
                                        const std::vector<Covariates>& schedule, int n_samples = 50,
                                        std::uint64_t seed = 1, const IntegratorConfig& integrator = {},
                                        int threads = 0);

/// Mann-Whitney test of H1: x tends to be smaller than y. Normal
/// approximation with tie correction; returns the one-sided p-value and
/// writes the U statistic of x.
double rank_test_less(const std::vector<double>& x, const std::vector<double>& y, double* u_statistic = nullptr);

/// Rank correlation with average ranks for ties.
double spearman_rank_correlation(const std::vector<double>& x, const std::vector<double>& y);

inline const std::vector<std::string> kSynthSpecies{"grebe", "cormorant", "goosander"};
inline constexpr int kSynthFirstYear = 2002;

/// Generating model of the synthetic bird data: seasonal harmonic shifts,
/// small year effects, Bernstein transformations of order 7, and either the
/// U-shaped Lambda(day) (winter correlations near 0.5, summer near 0) or a
/// constant Lambda.
JointModel synth_birds_truth(int n_years, LambdaMode mode = LambdaMode::CovariateDependent);

/// Every (year, day) of n_years consecutive 365-day years.
std::vector<Covariates> synth_schedule(int n_years);

/// Synthetic rows before complete-case filtering: each row independently
/// loses one species count with probability missing_rate.
std::vector<RawObservation> synth_birds_raw(std::uint64_t seed, int n_years, double missing_rate,
                                            std::size_t* truncations = nullptr);

ObservationTable synth_birds(std::uint64_t seed, int n_years, double missing_rate);

}  // namespace mctm
