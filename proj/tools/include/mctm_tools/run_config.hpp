#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "mctm/estimation.hpp"

namespace mctm::tools {

/// Everything a run needs besides the input table. Serialized verbatim
/// into every result document, so (input CSV, RunConfig) reproduces a run.
struct RunConfig {
  std::vector<std::string> species;   // empty: all count columns in file order
  int bernstein_coefs = 7;
  int harmonics = 3;
  std::string lambda = "constant";    // constant | covariate | both
  std::string likelihood = "discrete";
  OptimizerConfig optimizer;
  double hessian_step = 1e-4;
  std::uint64_t seed = 20210617;
  double ci_level = 0.95;
  int propagation_draws = 10000;
  int replicates = 100;
  int approx_samples = 50;
  int trajectory_step = 7;            // days between trajectory points
  std::vector<double> quantile_levels{0.1, 0.25, 0.5, 0.75, 0.9};
  int plot_year = 0;                  // 0: first year in the data
  double permutation_threshold = 0.05;
  // simulate
  int n_years = 15;
  double missing_rate = 0.067;
};

nlohmann::json to_json(const RunConfig& config);
/// Unknown keys and wrong types are errors naming the key.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);
void validate(const RunConfig& config);

std::vector<double> trajectory_days(const RunConfig& config);

}  // namespace mctm::tools
