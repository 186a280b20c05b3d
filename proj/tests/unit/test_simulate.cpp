#include "doctest.h"

#include <cmath>
#include <map>

#include "mctm/dependence.hpp"
#include "mctm/errors.hpp"
#include "mctm/rng.hpp"
#include "mctm/simulate.hpp"
#include "test_support.hpp"

using namespace mctm;
using namespace mctm::testing;

namespace {

std::vector<Covariates> schedule(int n) {
  std::vector<Covariates> rows;
  for (int i = 0; i < n; ++i) rows.push_back({2002 + i % 2, 1.0 + (i * 37) % 365});
  return rows;
}

JointModel two_species(double tau) {
  ModelSpec spec = small_spec(2, LambdaMode::Constant, {2002, 2003}, 1, 5, 30.0);
  Eigen::VectorXd t0(5), t1(5);
  t0 << -1.2, 0.2, 1.0, 1.8, 3.5;
  t1 << -0.8, 0.4, 1.3, 2.0, 3.2;
  return JointModel(spec, {{t0, Eigen::Vector3d(0.2, 0.4, 0.8)}, {t1, Eigen::Vector3d(-0.1, -0.3, 1.0)}},
                    {Eigen::VectorXd::Constant(1, tau), {}});
}

// Brute-force U: pairs with x above y, ties counting one half.
double brute_u(const std::vector<double>& x, const std::vector<double>& y) {
  double u = 0.0;
  for (double a : x)
    for (double b : y) u += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
  return u;
}

}  // namespace

TEST_CASE("philox streams") {
  RandomStream a(7, 0), b(7, 0), c(7, 1), d(8, 0);
  for (int i = 0; i < 100; ++i) {
    const auto va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
    CHECK(va != d.next_u64());
  }
  RandomStream u(3, 5);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double v = u.uniform();
    CHECK(v > 0.0);
    CHECK(v < 1.0);
    const double z = u.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::abs(sum / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("steep transformations give all-zero draws") {
  ModelSpec spec = small_spec(2, LambdaMode::Constant, {2002}, 1, 3, 10.0);
  const Eigen::Vector3d steep(30.0, 31.0, 32.0);
  const JointModel m(spec, {{steep, Eigen::Vector2d::Zero()}, {steep, Eigen::Vector2d::Zero()}},
                     {Eigen::VectorXd::Constant(1, -0.5), {}});
  RandomStream rng(1, 0);
  for (int i = 0; i < 100; ++i) CHECK(sample_counts(m, {2002, 10.0}, rng) == std::vector<int>{0, 0});
}

TEST_CASE("marginal frequencies follow the pmf under independence") {
  const JointModel m = two_species(0.0);
  const Covariates x{2003, 40.0};
  const int n = 100000;
  std::vector<Covariates> rows(n, x);
  const ObservationTable t = simulate_table(m, rows, 99);
  for (int j = 0; j < 2; ++j) {
    std::map<int, int> freq;
    for (const auto& o : t.rows()) ++freq[o.counts[j]];
    for (int y = 0; y <= 12; ++y) {
      const double p = m.marginal_pmf(j, y, x);
      const double se = std::sqrt(p * (1.0 - p) / n);
      CHECK(std::abs(freq[y] / static_cast<double>(n) - p) < 3.5 * se + 1e-12);
    }
  }
}

TEST_CASE("the first species keeps its pmf under dependence") {
  // Z_1 is standard normal whatever Lambda is; later species have latent
  // variance 1 + sum of squares and are not checked here.
  const JointModel m = two_species(-0.6);
  const Covariates x{2002, 300.0};
  const int n = 100000;
  const ObservationTable t = simulate_table(m, std::vector<Covariates>(n, x), 98);
  std::map<int, int> freq;
  for (const auto& o : t.rows()) ++freq[o.counts[0]];
  for (int y = 0; y <= 12; ++y) {
    const double p = m.marginal_pmf(0, y, x);
    CHECK(std::abs(freq[y] / static_cast<double>(n) - p) < 3.5 * std::sqrt(p * (1.0 - p) / n) + 1e-12);
  }
}

TEST_CASE("latent rank correlation is reproduced in the counts") {
  // A transformation with many distinct levels keeps ties rare, so the count
  // Spearman is close to the copula Spearman.
  ModelSpec spec = small_spec(2, LambdaMode::Constant, {2002}, 1, 3, 400.0);
  const Eigen::Vector3d theta(-3.0, 0.0, 3.0);
  const JointModel m(spec, {{theta, Eigen::Vector2d::Zero()}, {theta, Eigen::Vector2d::Zero()}},
                     {Eigen::VectorXd::Constant(1, -0.8), {}});
  const ObservationTable t = simulate_table(m, std::vector<Covariates>(100000, Covariates{2002, 1.0}), 5);
  std::vector<double> a, b;
  for (const auto& o : t.rows()) {
    a.push_back(o.counts[0]);
    b.push_back(o.counts[1]);
  }
  const double expected = spearman_from_corr(corr_from_sigma(sigma_from_lambda(m.lambda_matrix()))(1, 0));
  CHECK(std::abs(spearman_rank_correlation(a, b) - expected) < 0.01);
  CHECK(spearman_rank_correlation(a, b) == doctest::Approx(rank_corr(a, b)).epsilon(1e-12));
}

TEST_CASE("simulation is a function of seed and stream") {
  const JointModel m = two_species(-0.4);
  const auto rows = schedule(300);
  CHECK(simulate_table(m, rows, 3).same_data(simulate_table(m, rows, 3)));
  CHECK_FALSE(simulate_table(m, rows, 3).same_data(simulate_table(m, rows, 4)));
  CHECK_FALSE(simulate_table(m, rows, 3, 0).same_data(simulate_table(m, rows, 3, 1)));
  CHECK_THROWS_AS(simulate_table(m, {{2002, 1.5}}, 3), InputError);
}

TEST_CASE("draws beyond the support are truncated and counted") {
  ModelSpec spec = small_spec(1, LambdaMode::Constant, {2002}, 1, 3, 5.0);
  const JointModel m(spec, {{Eigen::Vector3d(-1.0, -0.5, 0.0), Eigen::Vector2d::Zero()}}, {Eigen::VectorXd(0), {}});
  std::size_t truncations = 0;
  const ObservationTable t = simulate_table(m, std::vector<Covariates>(2000, Covariates{2002, 1.0}), 8, 0, &truncations);
  int at_max = 0;
  for (const auto& o : t.rows()) {
    CHECK(o.counts[0] <= 5);
    at_max += o.counts[0] == 5;
  }
  // P(Y > 5) = 1 - Phi(alpha(5)) = 1/2 here.
  CHECK(truncations > 800);
  CHECK(truncations < 1200);
  CHECK(at_max >= static_cast<int>(truncations));
}

TEST_CASE("synthetic bird data") {
  std::size_t truncations = 0;
  const auto raw = synth_birds_raw(2021, 15, 0.067, &truncations);
  CHECK(raw.size() == 15u * 365u);
  std::size_t incomplete = 0;
  for (const auto& r : raw) {
    int missing = 0;
    for (const auto& c : r.counts) missing += !c.has_value();
    CHECK(missing <= 1);
    incomplete += missing;
  }
  const double rate = static_cast<double>(incomplete) / raw.size();
  CHECK(std::abs(rate - 0.067) < 4.0 * std::sqrt(0.067 * 0.933 / raw.size()));

  const ObservationTable t = synth_birds(2021, 15, 0.067);
  CHECK(t.size() == raw.size() - incomplete);
  CHECK(t.provenance().dropped_missing == incomplete);
  CHECK(t.species() == kSynthSpecies);
  CHECK(synth_birds(2021, 15, 0.067).same_data(t));

  // Winter counts exceed summer counts for every species.
  for (int j = 0; j < 3; ++j) {
    double winter = 0.0, summer = 0.0;
    int nw = 0, ns = 0;
    for (const auto& o : t.rows()) {
      if (o.day <= 45 || o.day > 335) winter += o.counts[j], ++nw;
      if (o.day > 150 && o.day <= 240) summer += o.counts[j], ++ns;
    }
    CHECK(winter / nw > summer / ns);
  }

  // Winter dependence is stronger than summer dependence in the truth.
  const JointModel truth = synth_birds_truth(15);
  const Eigen::MatrixXd w = spearman_from_corr(corr_from_sigma(sigma_from_lambda(truth.lambda_matrix(1.0))));
  const Eigen::MatrixXd s = spearman_from_corr(corr_from_sigma(sigma_from_lambda(truth.lambda_matrix(183.0))));
  for (int p = 0; p < 3; ++p) {
    const auto sp = pair_at(p);
    CHECK(w(sp.row, sp.col) > s(sp.row, sp.col));
  }
}

TEST_CASE("rank test") {
  double u = 0.0;
  CHECK(rank_test_less({1, 2, 3}, {4, 5, 6}, &u) == doctest::Approx(0.04042779918502612).epsilon(1e-12));
  CHECK(u == 0.0);
  const std::vector<double> x{1, 2, 2, 5, 7}, y{2, 3, 5, 8, 9, 9};
  CHECK(rank_test_less(x, y, &u) == doctest::Approx(0.06931293993946382).epsilon(1e-12));
  CHECK(u == brute_u(x, y));

  Gen g(71);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> a(g.integer(3, 30)), b(g.integer(3, 30));
    for (auto& v : a) v = g.integer(0, 8);
    for (auto& v : b) v = g.integer(0, 8);
    rank_test_less(a, b, &u);
    CHECK(u == brute_u(a, b));
    // Swapping the samples mirrors the statistic.
    double v = 0.0;
    rank_test_less(b, a, &v);
    CHECK(u + v == doctest::Approx(static_cast<double>(a.size() * b.size())));
  }
  CHECK_THROWS_AS(rank_test_less({}, {1.0}), InputError);
}

TEST_CASE("parametric bootstrap") {
  const ObservationTable data = simulate_table(two_species(-0.6), schedule(600), 17);
  const FitResult f = fit(data, make_spec(data, 5, 1), LikelihoodKind::DiscreteApprox);
  SimulationConfig cfg{.n_replicates = 6, .seed = 4, .covariate_schedule = schedule(600)};
  BootstrapOptions opt;
  opt.propagation.draws = 500;
  const BootstrapReport r = parametric_bootstrap(f, cfg, opt);
  REQUIRE(r.replicates.size() == 6);
  CHECK(r.failures == 0);
  REQUIRE(r.pairs.size() == 1);
  CHECK(r.pairs[0].q025 <= r.pairs[0].median);
  CHECK(r.pairs[0].median <= r.pairs[0].q975);
  for (std::size_t i = 0; i < r.replicates.size(); ++i) {
    CHECK(r.replicates[i].index == static_cast<int>(i));
    CHECK(r.replicates[i].ok);
    CHECK(r.replicates[i].spearman.size() == 1);
  }

  opt.threads = 3;
  const BootstrapReport again = parametric_bootstrap(f, cfg, opt);
  for (std::size_t i = 0; i < r.replicates.size(); ++i) {
    CHECK(again.replicates[i].loglik == r.replicates[i].loglik);
    CHECK(again.replicates[i].spearman == r.replicates[i].spearman);
  }
}

TEST_CASE("approximation comparison bookkeeping") {
  const ObservationTable data = simulate_table(two_species(-0.5), schedule(300), 18);
  const ModelSpec spec = make_spec(data, 5, 1);
  const FitResult fc = fit(data, spec, LikelihoodKind::ContinuousApprox);
  const FitResult fd = fit(data, spec, LikelihoodKind::DiscreteApprox);
  const ApproxComparison c = compare_approximations(fc, fd, schedule(80), 4, 2);
  REQUIRE(c.rows.size() == 8);
  int disc = 0;
  for (const auto& row : c.rows) {
    CHECK(row.ok);
    CHECK(std::isfinite(row.exact_loglik));
    disc += row.kind == LikelihoodKind::DiscreteApprox;
  }
  CHECK(disc == 4);
  CHECK(c.p_value >= 0.0);
  CHECK(c.p_value <= 1.0);
}
