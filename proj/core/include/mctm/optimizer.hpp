#pragma once

#include <functional>
#include <string>

#include <Eigen/Core>

namespace mctm {

struct OptimizerConfig {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6;   // max-norm of the gradient
  double relative_tolerance = 1e-10;  // relative change of the objective
  int polish_steps = 30;               // Newton steps on the numeric Hessian after BFGS stalls
};

/// Objective to minimize. Writes the gradient when `gradient` is non-null.
/// May throw; a throwing point is treated as +inf by the line search.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* gradient)>;

struct OptimizerResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;  // gradient max-norm below tolerance
  bool stalled = false;    // stopped on relative change or a failed line search
  std::string message;
};

/// BFGS with a strong-Wolfe line search. Deterministic for a given objective
/// and starting point.
OptimizerResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0,
                              const OptimizerConfig& config = {});

}  // namespace mctm
