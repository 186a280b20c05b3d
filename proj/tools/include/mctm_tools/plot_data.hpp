#pragma once

#include <string>
#include <vector>

#include "mctm/dependence.hpp"
#include "mctm/model.hpp"
#include "mctm/simulate.hpp"

namespace mctm::tools {

/// Conditional quantiles of each species by day for one year, on the count
/// scale and as log(count + 1).
std::string marginal_quantiles_csv(const JointModel& model, int year, const std::vector<double>& days,
                                   const std::vector<double>& levels);

struct LabelledTrajectory {
  std::string model;     // e.g. "constant" / "covariate"
  std::string species_a;
  std::string species_b;
  std::vector<TrajectoryPoint> points;
};

std::string trajectories_csv(const std::vector<LabelledTrajectory>& trajectories);

/// One row per replicate and pair (box-plot data).
std::string bootstrap_spearman_csv(const BootstrapReport& report, const ModelSpec& spec);
/// Per-replicate trajectories plus the generating curve (replicate = "truth").
std::string bootstrap_trajectories_csv(const BootstrapReport& report, const ModelSpec& spec);

/// Scatter rows of approximate vs exact log-likelihood.
std::string approx_scatter_csv(const ApproxComparison& comparison);

std::string permutation_csv(const PermutationReport& report, const std::vector<std::string>& species);

}  // namespace mctm::tools
