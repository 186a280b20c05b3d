#include "doctest.h"

#include <cmath>

#include <Eigen/Dense>

#include "mctm/errors.hpp"
#include "mctm/likelihood.hpp"
#include "test_support.hpp"

using namespace mctm;
using namespace mctm::testing;

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double phi_pdf(double x) { return std::exp(-0.5 * x * x - kLogSqrt2Pi); }

ObservationTable single_row(const ModelSpec& spec, int year, int day, std::vector<int> counts) {
  return ObservationTable(spec.species, {Observation{year, day, std::move(counts)}});
}

// Every (y1, y2) cell of the support grid, all on one covariate point.
ObservationTable full_grid(const ModelSpec& spec, int year, int day) {
  std::vector<Observation> rows;
  const int s0 = static_cast<int>(spec.support_hi[0]), s1 = static_cast<int>(spec.support_hi[1]);
  for (int a = 0; a <= s0; ++a)
    for (int b = 0; b <= s1; ++b) rows.push_back({year, day, {a, b}});
  return ObservationTable(spec.species, rows);
}

// Model whose transformation reaches far into the upper tail at the support
// maximum, so the mass above the grid is negligible.
JointModel tail_free_model(const ModelSpec& spec, Gen& g, double tau) {
  JointModel base = random_model(spec, g);
  std::vector<MarginalParams> m;
  for (int j = 0; j < spec.n_species(); ++j) {
    MarginalParams mp = base.marginal(j);
    mp.theta(mp.theta.size() - 1) = 12.0;
    m.push_back(mp);
  }
  LambdaParams l;
  l.tau = Eigen::VectorXd::Constant(spec.n_pairs(), tau);
  return JointModel(spec, m, l);
}

// Brute-force rectangle probability for J = 2 by composite Simpson on
// Z1, with Z2 | Z1 = z ~ N(-lambda z, 1).
double bivariate_rectangle(double lambda, double a0, double b0, double a1, double b1) {
  const double lo = std::max(a0, -12.0), hi = std::min(b0, 12.0);
  const int n = 40000;
  const double h = (hi - lo) / n;
  double s = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = lo + i * h;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    s += w * phi_pdf(z) * (phi_cdf(b1 + lambda * z) - phi_cdf(a1 + lambda * z));
  }
  return s * h / 3.0;
}

}  // namespace

TEST_CASE("midpoint transform") {
  CHECK(midpoint_transform(0) == 0.0);
  CHECK(midpoint_transform(1) == 0.5);
  CHECK(midpoint_transform(17) == 16.5);
  Eigen::VectorXi y(3);
  y << 0, 2, 9;
  CHECK(midpoint_transform(y) == Eigen::Vector3d(0.0, 1.5, 8.5));
}

TEST_CASE("continuous approximation is a Gaussian density in the transformed counts") {
  Gen g(31);
  for (auto mode : {LambdaMode::Constant, LambdaMode::CovariateDependent}) {
    const ModelSpec spec = small_spec(3, mode, {2002, 2003}, 2, 6, 20.0);
    for (int rep = 0; rep < 10; ++rep) {
      const JointModel m = random_model(spec, g);
      const ObservationTable t = random_table(spec, 40, g);
      const Eigen::VectorXd terms = loglik_terms(m, PreparedData(spec, t), LikelihoodKind::ContinuousApprox);
      for (std::size_t i = 0; i < t.size(); ++i) {
        const auto& o = t.rows()[i];
        Eigen::VectorXd h(3);
        double log_slope = 0.0;
        for (int j = 0; j < 3; ++j) {
          const BernsteinBasis b = spec.basis(j);
          const double mid = o.counts[j] == 0 ? 0.0 : o.counts[j] - 0.5;
          h(j) = b.eval(mid).dot(m.marginal(j).theta) - m.shift(j, o.covariates());
          log_slope += std::log(b.deriv(mid).dot(m.marginal(j).theta));
        }
        // log N(h; 0, Sigma) with Sigma = L^-1 L^-T, det Sigma = 1.
        const Eigen::MatrixXd L = m.lambda_matrix(mode == LambdaMode::Constant ? std::nullopt
                                                                               : std::optional<double>(o.day));
        const Eigen::MatrixXd Sigma = (L.inverse() * L.inverse().transpose()).eval();
        const double quad = h.dot(Sigma.ldlt().solve(h));
        const double expected = -0.5 * quad - 3 * kLogSqrt2Pi + log_slope;
        CHECK(terms(i) == doctest::Approx(expected).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("independence: discrete approximation factorizes into marginal pmfs") {
  Gen g(32);
  const ModelSpec spec = small_spec(3, LambdaMode::Constant, {2002, 2003}, 1, 5, 15.0);
  for (int rep = 0; rep < 10; ++rep) {
    JointModel r = random_model(spec, g);
    const JointModel m(spec, {r.marginal(0), r.marginal(1), r.marginal(2)}, {Eigen::VectorXd::Zero(3), {}});
    const ObservationTable t = random_table(spec, 100, g);
    const Eigen::VectorXd terms = loglik_terms(m, PreparedData(spec, t), LikelihoodKind::DiscreteApprox);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto& o = t.rows()[i];
      double expected = 0.0;
      for (int j = 0; j < 3; ++j) expected += std::log(m.marginal_pmf(j, o.counts[j], o.covariates()));
      CHECK(std::abs(terms(i) - expected) < 1e-12 * std::max(1.0, std::abs(expected)));
    }
  }
}

TEST_CASE("independence: exact and discrete agree when lambda is the identity") {
  Gen g(33);
  const ModelSpec spec = small_spec(3, LambdaMode::Constant, {2002}, 1, 5, 10.0);
  JointModel r = random_model(spec, g);
  const JointModel m(spec, {r.marginal(0), r.marginal(1), r.marginal(2)}, {Eigen::VectorXd::Zero(3), {}});
  const PreparedData d(spec, random_table(spec, 50, g));
  const Eigen::VectorXd exact = loglik_terms(m, d, LikelihoodKind::ExactOracle);
  const Eigen::VectorXd disc = loglik_terms(m, d, LikelihoodKind::DiscreteApprox);
  CHECK((exact - disc).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("exact likelihood matches brute-force bivariate quadrature") {
  const ModelSpec spec = small_spec(2, LambdaMode::Constant, {2002}, 1, 5, 10.0);
  Eigen::VectorXd t0(5), t1(5);
  t0 << -1.0, -0.2, 0.5, 1.4, 2.5;
  t1 << -0.6, 0.1, 0.9, 1.6, 2.2;
  const JointModel m(spec, {{t0, Eigen::Vector2d(0.3, -0.2)}, {t1, Eigen::Vector2d(-0.1, 0.4)}},
                     {Eigen::VectorXd::Constant(1, -0.5), {}});
  for (auto counts : {std::vector<int>{1, 1}, std::vector<int>{0, 3}, std::vector<int>{7, 0}}) {
    const ObservationTable t = single_row(spec, 2002, 77, counts);
    const Covariates x{2002, 77.0};
    auto limit = [&](int j, int y) {
      return y < 0 ? -INFINITY : m.transform(j, y) - m.shift(j, x);
    };
    const double oracle = bivariate_rectangle(-0.5, limit(0, counts[0] - 1), limit(0, counts[0]),
                                              limit(1, counts[1] - 1), limit(1, counts[1]));
    const double exact = std::exp(loglik_terms(m, PreparedData(spec, t), LikelihoodKind::ExactOracle)(0));
    CHECK(exact == doctest::Approx(oracle).epsilon(1e-7));
  }
}

TEST_CASE("both likelihoods are normalized over the count grid") {
  Gen g(34);
  const ModelSpec spec = small_spec(2, LambdaMode::Constant, {2002}, 1, 5, 12.0);
  const JointModel m = tail_free_model(spec, g, -0.6);
  const PreparedData d(spec, full_grid(spec, 2002, 140));
  for (auto kind : {LikelihoodKind::ExactOracle, LikelihoodKind::DiscreteApprox}) {
    const double total = loglik_terms(m, d, kind).array().exp().sum();
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("analytic gradients match central differences") {
  Gen g(35);
  for (auto mode : {LambdaMode::Constant, LambdaMode::CovariateDependent}) {
    for (auto kind : {LikelihoodKind::ContinuousApprox, LikelihoodKind::DiscreteApprox}) {
      for (int J : {2, 3}) {
        const ModelSpec spec = small_spec(J, mode, {2002, 2003}, 2, 5, 12.0);
        for (int rep = 0; rep < 5; ++rep) {
          const JointModel m = random_model(spec, g);
          const PreparedData d(spec, random_table(spec, 25, g));
          const Eigen::VectorXd an = loglik(m, d, kind).gradient;
          const Eigen::VectorXd num = fd_gradient(
              [&](const Eigen::VectorXd& p) {
                return loglik(JointModel::from_packed(spec, p), d, kind, {.with_gradient = false}).value;
              },
              m.pack());
          CHECK(max_rel_error(an, num) < 1e-5);
        }
      }
    }
  }
}

TEST_CASE("a small step along the gradient increases the likelihood") {
  Gen g(36);
  const ModelSpec spec = small_spec(3, LambdaMode::CovariateDependent, {2002, 2003}, 1, 5, 12.0);
  for (auto kind : {LikelihoodKind::ContinuousApprox, LikelihoodKind::DiscreteApprox}) {
    const JointModel m = random_model(spec, g);
    const PreparedData d(spec, random_table(spec, 60, g));
    const auto r = loglik(m, d, kind);
    const Eigen::VectorXd free = reparam::to_unconstrained(spec, m.pack());
    const Eigen::VectorXd gf = reparam::pullback_gradient(spec, free, r.gradient);
    const Eigen::VectorXd next = reparam::from_unconstrained(spec, free + 1e-4 * gf / gf.norm());
    CHECK(loglik(JointModel::from_packed(spec, next), d, kind, {.with_gradient = false}).value > r.value);
  }
}

TEST_CASE("results do not depend on the thread count") {
  Gen g(37);
  const ModelSpec spec = small_spec(3, LambdaMode::CovariateDependent, {2002, 2003}, 2, 6, 30.0);
  const JointModel m = random_model(spec, g);
  const PreparedData d(spec, random_table(spec, 3000, g));
  for (auto kind : {LikelihoodKind::ContinuousApprox, LikelihoodKind::DiscreteApprox}) {
    const auto one = loglik(m, d, kind, {.threads = 1});
    const auto four = loglik(m, d, kind, {.threads = 4});
    CHECK(one.value == four.value);
    CHECK(one.gradient == four.gradient);
    const auto fine = loglik(m, d, kind, {.block_size = 97, .threads = 1});
    CHECK(fine.value == doctest::Approx(one.value).epsilon(1e-12));
  }
}

TEST_CASE("degenerate inputs") {
  const ModelSpec spec = small_spec(2, LambdaMode::Constant, {2002}, 1, 3, 10.0);
  // Flat transformation: every cell above zero has zero width.
  const JointModel flat(spec, {{Eigen::Vector3d(0.5, 0.5, 0.5), Eigen::Vector2d::Zero()},
                               {Eigen::Vector3d(-1, 0, 1), Eigen::Vector2d::Zero()}},
                        {Eigen::VectorXd::Zero(1), {}});
  const PreparedData d(spec, single_row(spec, 2002, 5, {3, 2}));
  CHECK_THROWS_AS(loglik(flat, d, LikelihoodKind::DiscreteApprox), EvaluationError);
  CHECK_THROWS_AS(loglik(flat, d, LikelihoodKind::ContinuousApprox), EvaluationError);

  Gen g(38);
  const JointModel m = random_model(spec, g);
  CHECK_THROWS_AS(loglik(m, d, LikelihoodKind::ExactOracle), InputError);
  CHECK_NOTHROW(loglik(m, d, LikelihoodKind::ExactOracle, {.with_gradient = false}));

  const PreparedData clamped(spec, single_row(spec, 2002, 5, {14, 2}));
  CHECK(clamped.clamped_counts() == 1);
  CHECK(clamped.counts()(0, 0) == 10);

  const ModelSpec other = small_spec(2, LambdaMode::Constant, {2002}, 1, 4, 10.0);
  CHECK_THROWS(loglik(random_model(other, g), d, LikelihoodKind::DiscreteApprox));
}
