#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace mctm::normal {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double pdf(double x) {
  if (!std::isfinite(x)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

inline double log_pdf(double x) {
  return -0.5 * x * x - 0.91893853320467274178;  // log(sqrt(2 pi))
}

inline double cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

/// Upper tail 1 - Phi(x), accurate for large positive x.
inline double ccdf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

/// Phi(upper) - Phi(lower) without cancellation in the right tail.
inline double interval(double lower, double upper) {
  if (lower > 0.0) return ccdf(lower) - ccdf(upper);
  return cdf(upper) - cdf(lower);
}

double quantile(double p);

/// Inverse of ccdf: x with 1 - Phi(x) = q.
double upper_quantile(double q);

}  // namespace mctm::normal
