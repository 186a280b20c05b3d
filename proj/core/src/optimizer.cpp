#include "mctm/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>

namespace mctm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Point {
  double alpha = 0.0;
  double value = kInf;
  double slope = 0.0;  // directional derivative
  Eigen::VectorXd x;
  Eigen::VectorXd gradient;
};

class LineSearch {
 public:
  LineSearch(const Objective& f, const Eigen::VectorXd& x, const Eigen::VectorXd& dir, int& evals)
      : f_(f), x_(x), dir_(dir), evals_(evals) {}

  Point at(double alpha) const {
    Point p;
    p.alpha = alpha;
    p.x = x_ + alpha * dir_;
    p.gradient.resize(x_.size());
    ++evals_;
    try {
      p.value = f_(p.x, &p.gradient);
    } catch (const std::exception&) {
      p.value = kInf;
    }
    if (!std::isfinite(p.value) || !p.gradient.allFinite()) {
      p.value = kInf;
      p.slope = 0.0;
    } else {
      p.slope = p.gradient.dot(dir_);
    }
    return p;
  }

  // Strong Wolfe conditions, Nocedal & Wright algorithms 3.5 / 3.6.
  bool search(const Point& start, double alpha0, Point& out) const {
    constexpr double c1 = 1e-4, c2 = 0.9;
    constexpr int max_evals = 40;
    Point prev = start;
    double alpha = alpha0;
    for (int k = 0; k < max_evals; ++k) {
      Point cur = at(alpha);
      if (cur.value > start.value + c1 * alpha * start.slope || (k > 0 && cur.value >= prev.value)) {
        return zoom(start, prev, cur, out);
      }
      if (std::abs(cur.slope) <= -c2 * start.slope) {
        out = std::move(cur);
        return true;
      }
      if (cur.slope >= 0.0) return zoom(start, cur, prev, out);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return false;
  }

 private:
  bool zoom(const Point& start, Point lo, Point hi, Point& out) const {
    constexpr double c1 = 1e-4, c2 = 0.9;
    for (int k = 0; k < 40; ++k) {
      const double a = lo.alpha, b = hi.alpha;
      double trial = 0.5 * (a + b);
      if (std::isfinite(hi.value) && std::isfinite(lo.value)) {
        // minimizer of the quadratic through lo (value, slope) and hi (value)
        const double d = b - a;
        const double denom = 2.0 * (hi.value - lo.value - lo.slope * d);
        if (denom > 0.0) trial = a - lo.slope * d * d / denom;
      }
      const double lower = std::min(a, b), upper = std::max(a, b);
      const double margin = 0.1 * (upper - lower);
      trial = std::clamp(trial, lower + margin, upper - margin);
      Point cur = at(trial);
      if (cur.value > start.value + c1 * trial * start.slope || cur.value >= lo.value) {
        hi = std::move(cur);
      } else {
        if (std::abs(cur.slope) <= -c2 * start.slope) {
          out = std::move(cur);
          return true;
        }
        if (cur.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, std::abs(lo.alpha))) break;
    }
    // Accept a sufficient-decrease point even if curvature was not met.
    if (lo.alpha > 0.0 && lo.value < start.value) {
      out = std::move(lo);
      return true;
    }
    return false;
  }

  const Objective& f_;
  const Eigen::VectorXd& x_;
  const Eigen::VectorXd& dir_;
  int& evals_;
};

}  // namespace

OptimizerResult minimize_bfgs(const Objective& f, const Eigen::VectorXd& x0, const OptimizerConfig& config) {
  OptimizerResult res;
  const auto n = x0.size();
  Point cur;
  cur.x = x0;
  cur.gradient.resize(n);
  cur.value = f(cur.x, &cur.gradient);
  res.evaluations = 1;
  if (!std::isfinite(cur.value) || !cur.gradient.allFinite()) {
    res.x = x0;
    res.value = cur.value;
    res.gradient = cur.gradient;
    res.message = "objective is not finite at the starting point";
    return res;
  }

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;
  int resets = 0;
  int small_changes = 0;  // consecutive iterations below the relative tolerance
  for (res.iterations = 0; res.iterations < config.max_iterations; ++res.iterations) {
    if (cur.gradient.lpNorm<Eigen::Infinity>() < config.gradient_tolerance) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      break;
    }
    Eigen::VectorXd dir = -H * cur.gradient;
    double slope = dir.dot(cur.gradient);
    if (!(slope < 0.0)) {
      H.setIdentity();
      scaled = false;
      dir = -cur.gradient;
      slope = dir.dot(cur.gradient);
    }
    Point start = cur;
    start.alpha = 0.0;
    start.slope = slope;
    const double alpha0 = scaled ? 1.0 : std::min(1.0, 1.0 / cur.gradient.lpNorm<Eigen::Infinity>());

    LineSearch ls(f, cur.x, dir, res.evaluations);
    Point next;
    if (!ls.search(start, alpha0, next)) {
      if (resets++ < 2 && scaled) {
        H.setIdentity();
        scaled = false;
        continue;
      }
      res.stalled = true;
      res.message = "line search failed to find a decrease";
      break;
    }

    const Eigen::VectorXd s = next.x - cur.x;
    const Eigen::VectorXd y = next.gradient - cur.gradient;
    const double sy = s.dot(y);
    const double change = cur.value - next.value;
    cur = std::move(next);

    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * y;
      H += (rho * rho * y.dot(Hy) + rho) * s * s.transpose() - rho * (Hy * s.transpose() + s * Hy.transpose());
    }

    const bool small = std::abs(change) <= config.relative_tolerance * std::max(1.0, std::abs(cur.value));
    small_changes = small ? small_changes + 1 : 0;
    // One short step after a poor curvature update is common; stop only
    // when the objective has stopped moving for a few iterations.
    if (small_changes >= 3) {
      ++res.iterations;
      res.converged = cur.gradient.lpNorm<Eigen::Infinity>() < config.gradient_tolerance;
      res.stalled = !res.converged;
      res.message = res.converged ? "gradient tolerance reached" : "relative objective change below tolerance";
      break;
    }
  }
  if (res.iterations >= config.max_iterations && !res.converged && res.message.empty()) {
    res.message = "maximum number of iterations reached";
  }
  res.x = cur.x;
  res.value = cur.value;
  res.gradient = cur.gradient;
  return res;
}

}  // namespace mctm
