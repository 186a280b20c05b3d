#include "mctm/bernstein.hpp"

#include <cmath>
#include <string>

#include "mctm/errors.hpp"

namespace mctm {

namespace {

// b_{p,n}(u) for p = 0..n via the de Casteljau-style recursion; stays in
// [0, 1] and sums to one up to rounding.
Eigen::VectorXd bernstein_values(int n, double u) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n + 1);
  b(0) = 1.0;
  const double v = 1.0 - u;
  for (int k = 1; k <= n; ++k) {
    for (int p = k; p >= 1; --p) b(p) = v * b(p) + u * b(p - 1);
    b(0) *= v;
  }
  return b;
}

}  // namespace

BernsteinBasis::BernsteinBasis(int n_coef, double lo, double hi)
    : n_coef_(n_coef), lo_(lo), hi_(hi) {
  if (n_coef < 1) throw InputError("Bernstein basis needs at least one coefficient");
  if (!std::isfinite(lo) || !std::isfinite(hi) || !(hi > lo)) {
    throw InputError("Bernstein support must be a finite interval with hi > lo, got [" +
                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
}

Eigen::VectorXd BernsteinBasis::eval(double y, bool* clamped) const {
  if (!std::isfinite(y)) throw InputError("Bernstein evaluation at non-finite argument");
  bool c = false;
  if (y < lo_) {
    y = lo_;
    c = true;
  } else if (y > hi_) {
    y = hi_;
    c = true;
  }
  if (clamped) *clamped = c;
  return bernstein_values(n_coef_ - 1, (y - lo_) / (hi_ - lo_));
}

std::optional<Eigen::VectorXd> BernsteinBasis::eval_cutoff(double y, bool* clamped) const {
  if (std::isinf(y) && y < 0) return std::nullopt;
  if (!std::isfinite(y)) throw InputError("Bernstein cut-off must be finite or -inf");
  if (y < 0) return std::nullopt;
  return eval(std::floor(y), clamped);
}

Eigen::VectorXd BernsteinBasis::deriv(double y) const {
  if (!std::isfinite(y) || y < lo_ || y > hi_) {
    throw InputError("Bernstein derivative requested outside support at y = " + std::to_string(y));
  }
  const int n = n_coef_ - 1;
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n_coef_);
  if (n == 0) return d;
  // d/du b_{p,n} = n (b_{p-1,n-1} - b_{p,n-1})
  const Eigen::VectorXd lower = bernstein_values(n - 1, (y - lo_) / (hi_ - lo_));
  const double scale = n / (hi_ - lo_);
  for (int p = 0; p <= n; ++p) {
    const double left = p > 0 ? lower(p - 1) : 0.0;
    const double right = p < n ? lower(p) : 0.0;
    d(p) = scale * (left - right);
  }
  return d;
}

}  // namespace mctm
