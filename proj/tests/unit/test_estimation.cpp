#include "doctest.h"

#include <cmath>

#include "mctm/errors.hpp"
#include "mctm/estimation.hpp"
#include "mctm/simulate.hpp"
#include "test_support.hpp"

using namespace mctm;
using namespace mctm::testing;

namespace {

std::vector<Covariates> schedule(int n, std::vector<int> years) {
  std::vector<Covariates> rows;
  for (int i = 0; i < n; ++i) rows.push_back({years[i % years.size()], 1.0 + (i * 37) % 365});
  return rows;
}

// Two-species truth with a clear seasonal signal and dependence.
JointModel truth_model(LambdaMode mode) {
  ModelSpec spec = small_spec(2, mode, {2002, 2003}, 1, 5, 30.0);
  Eigen::VectorXd t0(5), t1(5);
  t0 << -1.2, 0.2, 1.0, 1.8, 3.5;
  t1 << -0.8, 0.4, 1.3, 2.0, 3.2;
  LambdaParams l{Eigen::VectorXd::Constant(1, -0.5), {}};
  if (mode == LambdaMode::CovariateDependent) {
    l.zeta = Eigen::MatrixXd(1, 2);
    l.zeta << 0.0, -0.4;
  }
  return JointModel(spec, {{t0, Eigen::Vector3d(0.2, 0.4, 0.8)}, {t1, Eigen::Vector3d(-0.1, -0.3, 1.0)}}, l);
}

FitResult manual_fit(double estimate, double se) {
  FitResult f;
  f.theta_hat = Eigen::VectorXd::Constant(1, estimate);
  f.vcov = Eigen::MatrixXd::Constant(1, 1, se * se);
  f.hessian_pd = true;
  return f;
}

}  // namespace

TEST_CASE("wald interval") {
  // lambda_AB = -0.467 with a standard error near 0.0166 gives [-0.500, -0.435].
  const Interval ci = wald_ci(manual_fit(-0.467, 0.0166), 0);
  CHECK(std::abs(ci.lower - (-0.500)) < 5e-3);
  CHECK(std::abs(ci.upper - (-0.435)) < 5e-3);
  CHECK(ci.upper - (-0.467) == doctest::Approx(-0.467 - ci.lower).epsilon(1e-12));

  const Interval point = wald_ci(manual_fit(0.3, 0.1), 0, 0.0);
  CHECK(point.lower == 0.3);
  CHECK(point.upper == 0.3);

  const Interval wide = wald_ci(manual_fit(0.0, 1.0), 0, 0.99);
  CHECK(wide.upper == doctest::Approx(2.5758293035489).epsilon(1e-10));

  CHECK_THROWS_AS(wald_ci(manual_fit(0.0, 1.0), 0, 1.0), InputError);
  CHECK_THROWS_AS(wald_ci(manual_fit(0.0, 1.0), 1), InputError);
  FitResult bad = manual_fit(0.0, 1.0);
  bad.vcov(0, 0) = -1.0;
  CHECK_THROWS_AS(wald_ci(bad, 0), EvaluationError);
}

TEST_CASE("likelihood ratio statistics") {
  const LrTestResult disc = lr_test(-42357.4, -42246.0, 18);
  CHECK(std::abs(disc.statistic - 222.8) < 5e-3);
  CHECK(disc.df == 18);
  CHECK(disc.p_value < 1e-4);
  CHECK(disc.warning.empty());

  const LrTestResult cont = lr_test(-41233.2, -41038.9, 18);
  CHECK(std::abs(cont.statistic - 388.6) < 5e-3);

  CHECK_FALSE(lr_test(-10.0, -12.0, 3).warning.empty());
  CHECK(lr_test(-10.0, -12.0, 3).p_value == 1.0);
}

TEST_CASE("chi-squared upper tail") {
  CHECK(chi_squared_upper(3.841458820694124, 1) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(chi_squared_upper(2.0 * std::log(20.0), 2) == doctest::Approx(0.05).epsilon(1e-12));  // exp(-x/2)
  CHECK(chi_squared_upper(28.869299430392623, 18) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(chi_squared_upper(0.0, 5) == 1.0);
  CHECK_THROWS_AS(chi_squared_upper(1.0, 0), InputError);
}

TEST_CASE("joint fit on simulated data") {
  const JointModel truth = truth_model(LambdaMode::Constant);
  const ObservationTable data = simulate_table(truth, schedule(2000, {2002, 2003}), 5);
  const ModelSpec spec = make_spec(data, 5, 1);

  for (auto kind : {LikelihoodKind::DiscreteApprox, LikelihoodKind::ContinuousApprox}) {
    CAPTURE(to_string(kind));
    const FitResult f = fit(data, spec, kind);
    CHECK(f.converged);
    CHECK(f.loglik >= f.loglik_start);
    CHECK(f.hessian_pd);
    CHECK(f.n_obs == 2000);
    CHECK(f.vcov.isApprox(f.vcov.transpose()));

    // The fitted likelihood is the likelihood at theta_hat.
    const PreparedData d(spec, data);
    CHECK(loglik(f.model(), d, kind, {.with_gradient = false}).value == doctest::Approx(f.loglik).epsilon(1e-12));

    // Warm start at the optimum stays there.
    FitOptions warm;
    warm.start = f.theta_hat;
    const FitResult again = fit(data, spec, kind, warm);
    CHECK(again.loglik == doctest::Approx(f.loglik).epsilon(1e-9));

    if (kind == LikelihoodKind::DiscreteApprox) {
      // Shift and dependence parameters have the truth's meaning whatever
      // the support; compare them on the standard-error scale.
      const ParameterLayout layout(spec);
      for (int j = 0; j < 2; ++j) {
        for (int k = 0; k < layout.beta_size(); ++k) {
          const int i = layout.beta_offset(j) + k;
          CHECK(std::abs(f.theta_hat(i) - truth.marginal(j).beta(k)) < 4.5 * std::sqrt(f.vcov(i, i)));
        }
      }
      const int l = layout.lambda_offset(0);
      CHECK(std::abs(f.theta_hat(l) - (-0.5)) < 4.5 * std::sqrt(f.vcov(l, l)));
    }
  }
}

TEST_CASE("fits are deterministic") {
  const JointModel truth = truth_model(LambdaMode::CovariateDependent);
  const ObservationTable data = simulate_table(truth, schedule(600, {2002, 2003}), 11);
  const ModelSpec spec = make_spec(data, 5, 1, LambdaMode::CovariateDependent);
  const FitResult a = fit(data, spec, LikelihoodKind::DiscreteApprox);
  const FitResult b = fit(data, spec, LikelihoodKind::DiscreteApprox, {.threads = 2});
  CHECK(a.theta_hat == b.theta_hat);
  CHECK(a.loglik == b.loglik);
  CHECK(a.vcov == b.vcov);
}

TEST_CASE("nested models and the likelihood ratio test") {
  const JointModel truth = truth_model(LambdaMode::CovariateDependent);
  const ObservationTable data = simulate_table(truth, schedule(1500, {2002, 2003}), 12);
  const ModelSpec cs = make_spec(data, 5, 1, LambdaMode::Constant);
  const ModelSpec xs = cs.with_lambda_mode(LambdaMode::CovariateDependent);
  const FitResult null_fit = fit(data, cs, LikelihoodKind::DiscreteApprox);

  const Eigen::VectorXd embedded = embed_constant_lambda(cs, null_fit.theta_hat);
  CHECK(embedded.size() == ParameterLayout(xs).size());
  const PreparedData dx(xs, data);
  CHECK(loglik(JointModel::from_packed(xs, embedded), dx, LikelihoodKind::DiscreteApprox).value == null_fit.loglik);

  FitOptions o;
  o.start = embedded;
  const FitResult alt = fit(data, xs, LikelihoodKind::DiscreteApprox, o);
  CHECK(alt.loglik >= null_fit.loglik);
  const LrTestResult lr = lr_test(null_fit, alt);
  CHECK(lr.df == 2);
  CHECK(lr.statistic == doctest::Approx(2.0 * (alt.loglik - null_fit.loglik)));
  CHECK(lr.p_value < 1e-3);  // zeta_cos = -0.4 is a strong seasonal signal at N = 1500

  CHECK_THROWS_AS(lr_test(alt, null_fit), InputError);
}

TEST_CASE("univariate marginal fit") {
  const JointModel truth = truth_model(LambdaMode::Constant);
  const ObservationTable data = simulate_table(truth, schedule(800, {2002, 2003}), 13);
  const ModelSpec spec = make_spec(data, 5, 1);
  const FitResult m = fit_marginal(data, spec, 1);
  CHECK(m.spec.n_species() == 1);
  CHECK(m.spec.species[0] == spec.species[1]);
  CHECK(m.converged);
  // With one species the discrete likelihood is the sum of log pmfs.
  const JointModel mm = m.model();
  double expected = 0.0;
  for (const auto& o : data.rows()) expected += std::log(mm.marginal_pmf(0, o.counts[1], o.covariates()));
  CHECK(m.loglik == doctest::Approx(expected).epsilon(1e-10));
  CHECK_THROWS_AS(fit_marginal(data, spec, 2), InputError);
}

TEST_CASE("warm start from a fit with tied coefficients") {
  // Sparse upper tails drive some fitted increments to zero; the covariate
  // fit must still start from the constant fit.
  const ObservationTable data = synth_birds(20210617, 3, 0.067);
  const ModelSpec cs = make_spec(data, 7, 3, LambdaMode::Constant);
  const FitResult null_fit = fit(data, cs, LikelihoodKind::DiscreteApprox);
  FitOptions o;
  o.start = embed_constant_lambda(cs, null_fit.theta_hat);
  const FitResult alt = fit(data, cs.with_lambda_mode(LambdaMode::CovariateDependent), LikelihoodKind::DiscreteApprox, o);
  CHECK(alt.converged);
  CHECK(alt.loglik >= null_fit.loglik);
}

TEST_CASE("fits with increments near the monotonicity boundary converge") {
  // Replicates whose optimum has one Bernstein increment at (1) or just off
  // (98) zero; the log-increment map alone approaches both only linearly.
  const JointModel birds = synth_birds_truth(6, LambdaMode::Constant);
  std::vector<MarginalParams> lowered;
  for (int j = 0; j < 3; ++j) {
    MarginalParams m = birds.marginal(j);
    m.theta.array() -= 1.5;
    lowered.push_back(m);
  }
  const JointModel truth(birds.spec(), lowered, birds.lambda());
  std::vector<Covariates> schedule = synth_schedule(6);
  schedule.resize(2000);
  for (std::uint64_t rep : {1, 98}) {
    const ObservationTable data = simulate_table(truth, schedule, 5, rep);
    const FitResult f = fit(data, make_spec(data, 7, 3, LambdaMode::Constant), LikelihoodKind::DiscreteApprox);
    CHECK(f.converged);
    CHECK(f.gradient_norm < 1e-6);
    CHECK(f.hessian_pd);
  }
}

TEST_CASE("invalid fits") {
  const JointModel truth = truth_model(LambdaMode::Constant);
  const ObservationTable data = simulate_table(truth, schedule(100, {2002, 2003}), 14);
  const ModelSpec spec = make_spec(data, 5, 1);
  CHECK_THROWS_AS(fit(data, spec, LikelihoodKind::ExactOracle), InputError);
  FitOptions bad;
  bad.start = Eigen::VectorXd::Zero(3);
  CHECK_THROWS_AS(fit(data, spec, LikelihoodKind::DiscreteApprox, bad), InputError);

  std::vector<Observation> rows = data.rows();
  for (auto& r : rows) r.counts[0] = 4;
  CHECK_THROWS_AS(make_spec(ObservationTable(data.species(), rows), 5, 1), InputError);
}
