#include "mctm/mvn_rectangle.hpp"

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "mctm/errors.hpp"
#include "mctm/normal.hpp"

namespace mctm {

namespace {

using Rule = boost::math::quadrature::gauss<double, 10>;

constexpr double kNoiseFraction = 1.0 / 64.0;
constexpr double kEps = 2.220446049250313e-16;
constexpr double kTailCut = 10.0;
constexpr int kPanels = 8;

class NestedIntegrator {
 public:
  NestedIntegrator(const Eigen::MatrixXd& chol, const Eigen::VectorXd& lower,
                   const Eigen::VectorXd& upper, const IntegratorConfig& config)
      : chol_(chol), lower_(lower), upper_(upper), config_(config), w_(chol.rows(), 0.0) {}

  double run() { return level(0); }
  double error() const { return error_; }
  bool failed() const { return failed_; }

 private:
  double level(int k) {
    double offset = 0.0;
    for (int m = 0; m < k; ++m) offset += chol_(k, m) * w_[m];
    const double d = chol_(k, k);
    const double a = (lower_(k) - offset) / d;
    const double b = (upper_(k) - offset) / d;
    if (!(b > a)) return 0.0;
    if (k == chol_.rows() - 1) return normal::interval(a, b);

    // Integrate phi(w) * P(inner | w) over w directly: the integrand is
    // analytic, unlike its image under t = Phi(w), which has endpoint
    // singularities. Infinite limits are cut 10 units beyond the bulk, which
    // drops a relative mass below 1e-21.
    const double lo = std::isfinite(a) ? a : std::min(b, 0.0) - kTailCut;
    const double hi = std::isfinite(b) ? b : std::max(a, 0.0) + kTailCut;
    auto f = [this, k](double w) {
      w_[k] = w;
      return normal::pdf(w) * level(k + 1);
    };
    // A first pass on fixed panels sets the scale for the tolerance, so a
    // narrow peak cannot hide between the nodes of a single rule.
    std::array<double, kPanels> pieces{};
    double whole = 0.0;
    const double width = (hi - lo) / kPanels;
    for (int i = 0; i < kPanels; ++i) {
      pieces[i] = Rule::integrate(f, lo + i * width, lo + (i + 1) * width);
      whole += pieces[i];
    }
    const double tol = std::max(config_.rel_tol * std::abs(whole), config_.abs_tol) / kPanels;
    // Halving the tolerance per split stops at the noise level of the inner
    // integrals, which are themselves only accurate to rel_tol.
    const double floor = std::max(kNoiseFraction * tol, 64.0 * kEps * std::abs(whole));
    double total = 0.0;
    for (int i = 0; i < kPanels; ++i) {
      const double b0 = lo + i * width;
      const double b1 = i + 1 == kPanels ? hi : lo + (i + 1) * width;
      total += adapt(f, b0, b1, pieces[i], tol, floor, 0);
    }
    return total;
  }

  template <class F>
  double adapt(F& f, double a, double b, double whole, double tol, double floor, int depth) {
    const double m = 0.5 * (a + b);
    const double left = Rule::integrate(f, a, m);
    const double right = Rule::integrate(f, m, b);
    const double both = left + right;
    const double diff = std::abs(both - whole);
    // The integrand is at most phi(0), so a narrow enough piece cannot
    // contribute more than the floor.
    if (diff <= tol || normal::kInvSqrt2Pi * (b - a) <= floor || !(m > a && m < b)) {
      error_ += diff;
      return both;
    }
    if (depth >= config_.max_depth) {
      failed_ = true;
      error_ += diff;
      return both;
    }
    const double half = std::max(0.5 * tol, floor);
    return adapt(f, a, m, left, half, floor, depth + 1) + adapt(f, m, b, right, half, floor, depth + 1);
  }

  const Eigen::MatrixXd& chol_;
  const Eigen::VectorXd& lower_;
  const Eigen::VectorXd& upper_;
  IntegratorConfig config_;
  std::vector<double> w_;
  double error_ = 0.0;
  bool failed_ = false;
};

}  // namespace

RectangleResult mvn_rectangle(const Eigen::MatrixXd& chol, const Eigen::VectorXd& lower,
                              const Eigen::VectorXd& upper, const IntegratorConfig& config) {
  const auto n = chol.rows();
  if (n == 0 || chol.cols() != n || lower.size() != n || upper.size() != n) {
    throw InputError("mvn_rectangle: dimension mismatch");
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!(chol(k, k) > 0.0)) throw InputError("mvn_rectangle: Cholesky diagonal must be positive");
    if (std::isnan(lower(k)) || std::isnan(upper(k))) throw InputError("mvn_rectangle: NaN limit");
  }
  NestedIntegrator integrator(chol, lower, upper, config);
  const double p = integrator.run();
  if (integrator.failed()) {
    throw EvaluationError("rectangle integral did not reach tolerance " + std::to_string(config.rel_tol) +
                          " (achieved error estimate " + std::to_string(integrator.error()) +
                          " on probability " + std::to_string(p) + ")");
  }
  return {p, integrator.error()};
}

}  // namespace mctm
