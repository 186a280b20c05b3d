#include "doctest.h"

#include <cmath>
#include <numbers>

#include "mctm/bernstein.hpp"
#include "mctm/errors.hpp"
#include "mctm/harmonic.hpp"
#include "test_support.hpp"

using namespace mctm;
using mctm::testing::Gen;

namespace {

// Textbook Bernstein basis, C(n, k) t^k (1 - t)^(n - k).
double binomial_basis(int n, int k, double t) {
  return std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)) * std::pow(t, k) *
         std::pow(1.0 - t, n - k);
}

}  // namespace

TEST_CASE("bernstein endpoints pick the first and last coefficient") {
  const BernsteinBasis b(7, 0.0, 10.0);
  Eigen::VectorXd e0 = Eigen::VectorXd::Zero(7), e6 = Eigen::VectorXd::Zero(7);
  e0(0) = 1.0;
  e6(6) = 1.0;
  CHECK(b.eval(0.0).isApprox(e0));
  CHECK(b.eval(10.0).isApprox(e6));
  const Eigen::VectorXd mid = b.eval(5.0);
  CHECK(mid.minCoeff() >= 0.0);
  CHECK(mid.sum() == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("bernstein basis matches the binomial formula") {
  Gen g(11);
  for (int P : {2, 4, 7, 12}) {
    const BernsteinBasis b(P, 0.0, 37.0);
    for (int rep = 0; rep < 50; ++rep) {
      const double y = g.uniform(0.0, 37.0);
      const Eigen::VectorXd row = b.eval(y);
      for (int k = 0; k < P; ++k) CHECK(row(k) == doctest::Approx(binomial_basis(P - 1, k, y / 37.0)).epsilon(1e-12));
    }
  }
}

TEST_CASE("partition of unity on 1000 random points") {
  Gen g(12);
  const BernsteinBasis b(7, 0.0, 154.0);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const Eigen::VectorXd row = b.eval(g.uniform(0.0, 154.0));
    CHECK(row.minCoeff() >= 0.0);
    worst = std::max(worst, std::abs(row.sum() - 1.0));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("monotone coefficients give a monotone transformation") {
  Gen g(13);
  for (int rep = 0; rep < 50; ++rep) {
    const BernsteinBasis b(7, 0.0, 60.0);
    const Eigen::VectorXd theta = g.monotone_theta(7);
    double prev = -INFINITY;
    for (int y = 0; y <= 60; ++y) {
      const double a = b.eval(y).dot(theta);
      CHECK(a >= prev);
      prev = a;
    }
  }
}

TEST_CASE("cut-off evaluation floors and maps negatives to the sentinel") {
  const BernsteinBasis b(7, 0.0, 10.0);
  CHECK_FALSE(b.eval_cutoff(-0.5).has_value());
  CHECK_FALSE(b.eval_cutoff(-INFINITY).has_value());
  CHECK(b.eval_cutoff(2.7)->isApprox(b.eval(2.0)));
  CHECK(b.eval_cutoff(0.0)->isApprox(b.eval(0.0)));
  CHECK_THROWS_AS(b.eval_cutoff(NAN), InputError);
  CHECK_THROWS_AS(b.eval(INFINITY), InputError);
}

TEST_CASE("arguments beyond the support clamp and report it") {
  const BernsteinBasis b(5, 0.0, 10.0);
  bool clamped = false;
  CHECK(b.eval(14.0, &clamped).isApprox(b.eval(10.0)));
  CHECK(clamped);
  clamped = false;
  b.eval(3.0, &clamped);
  CHECK_FALSE(clamped);
}

TEST_CASE("bernstein derivative") {
  SUBCASE("constant coefficients have zero slope") {
    const BernsteinBasis b(7, 0.0, 10.0);
    const Eigen::VectorXd c = Eigen::VectorXd::Constant(7, 2.5);
    for (double y : {0.3, 4.0, 9.9}) CHECK(std::abs(b.deriv(y).dot(c)) < 1e-12);
  }
  SUBCASE("equally spaced coefficients reproduce the identity") {
    const BernsteinBasis b(7, 0.0, 1.0);
    const Eigen::VectorXd lin = Eigen::VectorXd::LinSpaced(7, 0.0, 1.0);
    for (double y : {0.1, 0.5, 0.77}) CHECK(b.deriv(y).dot(lin) == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("matches central differences") {
    Gen g(14);
    const BernsteinBasis b(7, 0.0, 20.0);
    for (int rep = 0; rep < 20; ++rep) {
      const Eigen::VectorXd theta = g.monotone_theta(7);
      const double y = 3.2, h = 1e-5;
      const double fd = (b.eval(y + h).dot(theta) - b.eval(y - h).dot(theta)) / (2 * h);
      const double an = b.deriv(y).dot(theta);
      CHECK(an >= 0.0);
      CHECK(std::abs(an - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
    }
  }
  SUBCASE("outside the support is an error") {
    const BernsteinBasis b(7, 0.0, 20.0);
    CHECK_THROWS_AS(b.deriv(-0.1), InputError);
    CHECK_THROWS_AS(b.deriv(20.5), InputError);
  }
}

TEST_CASE("invalid bases are rejected") {
  CHECK_THROWS_AS(BernsteinBasis(0, 0.0, 1.0), InputError);
  CHECK_THROWS_AS(BernsteinBasis(3, 1.0, 1.0), InputError);
}

TEST_CASE("shift design layout") {
  std::vector<int> years(15);
  std::iota(years.begin(), years.end(), 2002);
  const HarmonicDesign d(3, years);
  CHECK(d.row_width() == 21);
  CHECK(d.row(2010, 40.0).size() == 21);
  CHECK(d.shift_width() == 20);

  const Eigen::VectorXd base = d.row(2002, 123.0);
  CHECK(base(0) == 1.0);
  CHECK(base.segment(1, 14).isZero());
  const Eigen::VectorXd y5 = d.row(2007, 123.0);
  CHECK(y5.segment(1, 14).sum() == 1.0);
  CHECK(y5(1 + 4) == 1.0);

  const Eigen::VectorXd h = d.harmonic_row(100.0);
  const double w = 2.0 * std::numbers::pi / 365.0;
  for (int k = 1; k <= 3; ++k) {
    CHECK(h(2 * (k - 1)) == doctest::Approx(std::sin(k * w * 100.0)).epsilon(1e-14));
    CHECK(h(2 * (k - 1) + 1) == doctest::Approx(std::cos(k * w * 100.0)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(d.row(2020, 1.0), InputError);
  CHECK_THROWS_AS(d.shift_row(2002, 366.0), InputError);
}

TEST_CASE("harmonic block is periodic") {
  const HarmonicDesign d(3, {2002});
  CHECK((d.harmonic_row(365.0) - d.harmonic_row(0.0)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((d.harmonic_row(1.0) - d.harmonic_row(366.0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("harmonic columns integrate to zero over the year") {
  const HarmonicDesign d(3, {2002});
  // Composite Simpson rule on [0, 365] with 20000 panels.
  const int n = 20000;
  const double h = 365.0 / n;
  Eigen::VectorXd integral = Eigen::VectorXd::Zero(6), sq = Eigen::VectorXd::Zero(6);
  for (int i = 0; i <= n; ++i) {
    const double wgt = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    const Eigen::VectorXd r = d.harmonic_row(i * h);
    integral += wgt * r;
    sq += wgt * r.cwiseProduct(r);
  }
  integral *= h / 3.0;
  sq *= h / 3.0;
  for (int c = 0; c < 6; ++c) CHECK(std::abs(integral(c)) < 1e-8 * std::sqrt(sq(c)));
}
