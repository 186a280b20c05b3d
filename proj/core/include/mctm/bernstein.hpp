#pragma once

#include <optional>

#include <Eigen/Core>

namespace mctm {

/// Bernstein polynomial basis of order P-1 on [lo, hi].
///
/// alpha(y) = eval(y).dot(theta) is non-decreasing in y whenever theta is
/// non-decreasing. Arguments outside the support are clamped to the nearest
/// boundary; callers that need to know can pass a flag to eval().
class BernsteinBasis {
 public:
  BernsteinBasis(int n_coef, double lo, double hi);

  int size() const noexcept { return n_coef_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }

  /// Basis row at a real argument (no flooring).
  Eigen::VectorXd eval(double y, bool* clamped = nullptr) const;

  /// Basis row at the cut-off floor(y). Returns nullopt for y < 0, the
  /// "minus infinity" sentinel that CDF evaluation maps to probability 0.
  std::optional<Eigen::VectorXd> eval_cutoff(double y, bool* clamped = nullptr) const;

  /// d/dy of the basis row. Endpoints give the one-sided derivative.
  Eigen::VectorXd deriv(double y) const;

 private:
  int n_coef_;
  double lo_;
  double hi_;
};

}  // namespace mctm
