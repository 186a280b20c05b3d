#include "mctm_tools/run_config.hpp"

#include <fstream>
#include <set>

#include "mctm/errors.hpp"
#include "mctm/harmonic.hpp"

namespace mctm::tools {

using nlohmann::json;

json to_json(const RunConfig& c) {
  return json{{"species", c.species},
              {"bernstein_coefs", c.bernstein_coefs},
              {"harmonics", c.harmonics},
              {"lambda", c.lambda},
              {"likelihood", c.likelihood},
              {"optimizer",
               {{"max_iterations", c.optimizer.max_iterations},
                {"gradient_tolerance", c.optimizer.gradient_tolerance},
                {"relative_tolerance", c.optimizer.relative_tolerance},
                {"polish_steps", c.optimizer.polish_steps}}},
              {"hessian_step", c.hessian_step},
              {"seed", c.seed},
              {"ci_level", c.ci_level},
              {"propagation_draws", c.propagation_draws},
              {"replicates", c.replicates},
              {"approx_samples", c.approx_samples},
              {"trajectory_step", c.trajectory_step},
              {"quantile_levels", c.quantile_levels},
              {"plot_year", c.plot_year},
              {"permutation_threshold", c.permutation_threshold},
              {"n_years", c.n_years},
              {"missing_rate", c.missing_rate}};
}

namespace {

template <class T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

RunConfig run_config_from_json(const json& j) {
  if (!j.is_object()) throw InputError("config must be a JSON object");
  static const std::set<std::string> known{
      "species",      "bernstein_coefs", "harmonics",         "lambda",         "likelihood",
      "optimizer",    "hessian_step",    "seed",              "ci_level",       "propagation_draws",
      "replicates",   "approx_samples",  "trajectory_step",   "quantile_levels", "plot_year",
      "permutation_threshold", "n_years", "missing_rate"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) throw InputError("unknown config key '" + key + "'");
  }
  RunConfig c;
  read(j, "species", c.species);
  read(j, "bernstein_coefs", c.bernstein_coefs);
  read(j, "harmonics", c.harmonics);
  read(j, "lambda", c.lambda);
  read(j, "likelihood", c.likelihood);
  if (j.contains("optimizer")) {
    const json& o = j.at("optimizer");
    if (!o.is_object()) throw InputError("config key 'optimizer' must be an object");
    static const std::set<std::string> opt_keys{"max_iterations", "gradient_tolerance", "relative_tolerance",
                                                "polish_steps"};
    for (const auto& [key, value] : o.items()) {
      if (!opt_keys.count(key)) throw InputError("unknown optimizer key '" + key + "'");
    }
    read(o, "max_iterations", c.optimizer.max_iterations);
    read(o, "gradient_tolerance", c.optimizer.gradient_tolerance);
    read(o, "relative_tolerance", c.optimizer.relative_tolerance);
    read(o, "polish_steps", c.optimizer.polish_steps);
  }
  read(j, "hessian_step", c.hessian_step);
  read(j, "seed", c.seed);
  read(j, "ci_level", c.ci_level);
  read(j, "propagation_draws", c.propagation_draws);
  read(j, "replicates", c.replicates);
  read(j, "approx_samples", c.approx_samples);
  read(j, "trajectory_step", c.trajectory_step);
  read(j, "quantile_levels", c.quantile_levels);
  read(j, "plot_year", c.plot_year);
  read(j, "permutation_threshold", c.permutation_threshold);
  read(j, "n_years", c.n_years);
  read(j, "missing_rate", c.missing_rate);
  validate(c);
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config file '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

void validate(const RunConfig& c) {
  if (c.bernstein_coefs < 2) throw InputError("bernstein_coefs must be at least 2");
  if (c.harmonics < 0) throw InputError("harmonics must be non-negative");
  if (c.lambda != "constant" && c.lambda != "covariate" && c.lambda != "both") {
    throw InputError("lambda must be 'constant', 'covariate' or 'both', got '" + c.lambda + "'");
  }
  if (c.likelihood != "discrete" && c.likelihood != "continuous") {
    throw InputError("likelihood must be 'discrete' or 'continuous', got '" + c.likelihood + "'");
  }
  if (c.optimizer.max_iterations < 1) throw InputError("optimizer.max_iterations must be positive");
  if (!(c.optimizer.gradient_tolerance > 0.0)) throw InputError("optimizer.gradient_tolerance must be positive");
  if (!(c.hessian_step > 0.0)) throw InputError("hessian_step must be positive");
  if (!(c.ci_level > 0.0 && c.ci_level < 1.0)) throw InputError("ci_level must lie in (0, 1)");
  if (c.propagation_draws < 2) throw InputError("propagation_draws must be at least 2");
  if (c.replicates < 1) throw InputError("replicates must be positive");
  if (c.approx_samples < 1) throw InputError("approx_samples must be positive");
  if (c.trajectory_step < 1 || c.trajectory_step > kDaysPerYear) {
    throw InputError("trajectory_step must lie in [1, 365]");
  }
  for (double p : c.quantile_levels) {
    if (!(p > 0.0 && p < 1.0)) throw InputError("quantile_levels must lie in (0, 1)");
  }
  if (c.n_years < 1) throw InputError("n_years must be positive");
  if (!(c.missing_rate >= 0.0 && c.missing_rate < 1.0)) throw InputError("missing_rate must lie in [0, 1)");
}

std::vector<double> trajectory_days(const RunConfig& c) {
  std::vector<double> days;
  for (int d = 1; d <= kDaysPerYear; d += c.trajectory_step) days.push_back(d);
  if (days.back() != kDaysPerYear) days.push_back(kDaysPerYear);
  return days;
}

}  // namespace mctm::tools
