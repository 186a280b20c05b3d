#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mctm/model.hpp"
#include "mctm/mvn_rectangle.hpp"
#include "mctm/observations.hpp"

namespace mctm {

enum class LikelihoodKind { ContinuousApprox, DiscreteApprox, ExactOracle };

std::string to_string(LikelihoodKind kind);
LikelihoodKind likelihood_kind_from_string(const std::string& s);

/// Count -> interval midpoint: y - 0.5 for y >= 1, 0 for y = 0.
double midpoint_transform(int y);
Eigen::VectorXd midpoint_transform(const Eigen::VectorXi& y);

/// Observation data with every basis row the likelihoods need evaluated once
/// up front, for a fixed model structure (supports, orders, design).
class PreparedData {
 public:
  PreparedData(const ModelSpec& spec, const ObservationTable& table);

  std::size_t size() const noexcept { return n_; }
  int n_species() const noexcept { return n_species_; }

  const Eigen::MatrixXi& counts() const noexcept { return counts_; }
  const Eigen::MatrixXd& shift_design() const noexcept { return shift_; }
  const Eigen::MatrixXd& lambda_design() const noexcept { return lambda_design_; }
  const std::vector<double>& days() const noexcept { return days_; }

  // Per species: basis at y, at y - 1 (zero rows where y = 0), at the
  // midpoint, and the basis derivative at the midpoint.
  const Eigen::MatrixXd& upper_basis(int j) const { return upper_.at(j); }
  const Eigen::MatrixXd& lower_basis(int j) const { return lower_.at(j); }
  const Eigen::MatrixXd& mid_basis(int j) const { return mid_.at(j); }
  const Eigen::MatrixXd& mid_deriv(int j) const { return mid_deriv_.at(j); }

  /// Counts above the model support that were clamped to its maximum.
  std::size_t clamped_counts() const noexcept { return clamped_; }

 private:
  std::size_t n_ = 0;
  int n_species_ = 0;
  Eigen::MatrixXi counts_;
  Eigen::MatrixXd shift_;
  Eigen::MatrixXd lambda_design_;
  std::vector<double> days_;
  std::vector<Eigen::MatrixXd> upper_, lower_, mid_, mid_deriv_;
  std::size_t clamped_ = 0;
};

struct LikelihoodResult {
  double value = 0.0;
  Eigen::VectorXd gradient;       // packed-parameter gradient; empty if not requested
  std::size_t floored_cells = 0;  // discrete cells floored at 1e-300
};

struct LikelihoodOptions {
  bool with_gradient = true;
  std::size_t block_size = 512;   // fixed reduction blocks; results depend on this, not on threads
  int threads = 0;                // 0: MCTM_THREADS
};

/// Log-likelihood (and gradient) of an approximate likelihood kind. The
/// per-observation terms are reduced in fixed blocks, then blocks in order.
LikelihoodResult loglik(const JointModel& model, const PreparedData& data, LikelihoodKind kind,
                        const LikelihoodOptions& options = {});

/// Per-observation log-likelihood contributions.
Eigen::VectorXd loglik_terms(const JointModel& model, const PreparedData& data, LikelihoodKind kind,
                             const IntegratorConfig& integrator = {});

double loglik_continuous(const JointModel& model, const PreparedData& data);
Eigen::VectorXd grad_continuous(const JointModel& model, const PreparedData& data);
double loglik_discrete(const JointModel& model, const PreparedData& data);
Eigen::VectorXd grad_discrete(const JointModel& model, const PreparedData& data);

/// Exact interval-censored log-likelihood by multivariate normal rectangle
/// probabilities. Evaluation only; J <= 3.
double loglik_exact(const JointModel& model, const PreparedData& data,
                    const IntegratorConfig& integrator = {});

inline constexpr double kCellFloor = 1e-300;

}  // namespace mctm
