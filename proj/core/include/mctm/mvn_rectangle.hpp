#pragma once

#include <Eigen/Core>

namespace mctm {

struct IntegratorConfig {
  double rel_tol = 1e-11;
  double abs_tol = 1e-300;
  int max_depth = 64;
};

struct RectangleResult {
  double probability = 0.0;
  double error_estimate = 0.0;
};

/// P(lower < Z <= upper) for Z ~ N(0, C C') with C lower triangular and a
/// positive diagonal. lower entries may be -inf.
///
/// Z = C W with W standard normal turns the rectangle into nested limits
/// on W_1, W_2 | W_1, ...; every level but the last is integrated with
/// adaptive Gauss-Legendre after the probability-integral substitution
/// t = Phi(w), and the last level is a closed-form Phi difference.
/// Subdivision is deterministic. Throws EvaluationError when the requested
/// tolerance is not met within max_depth bisections.
RectangleResult mvn_rectangle(const Eigen::MatrixXd& chol, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper, const IntegratorConfig& config = {});

}  // namespace mctm
