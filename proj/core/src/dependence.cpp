#include "mctm/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "mctm/errors.hpp"
#include "mctm/rng.hpp"

namespace mctm {

Eigen::MatrixXd sigma_from_lambda(const Eigen::MatrixXd& lambda) {
  const auto n = lambda.rows();
  if (lambda.cols() != n || n == 0) throw InputError("Lambda must be a non-empty square matrix");
  if (!lambda.allFinite()) throw InputError("Lambda has non-finite entries");
  for (Eigen::Index r = 0; r < n; ++r) {
    if (lambda(r, r) != 1.0) throw InputError("Lambda must have a unit diagonal");
    for (Eigen::Index c = r + 1; c < n; ++c) {
      if (lambda(r, c) != 0.0) throw InputError("Lambda must be lower triangular");
    }
  }
  const Eigen::MatrixXd inv =
      lambda.triangularView<Eigen::UnitLower>().solve(Eigen::MatrixXd::Identity(n, n));
  return inv * inv.transpose();
}

Eigen::MatrixXd corr_from_sigma(const Eigen::MatrixXd& sigma) {
  const auto n = sigma.rows();
  if (sigma.cols() != n || n == 0) throw InputError("Sigma must be a non-empty square matrix");
  if (!sigma.allFinite()) throw InputError("Sigma has non-finite entries");
  if (Eigen::LLT<Eigen::MatrixXd>(sigma).info() != Eigen::Success) {
    throw InputError("Sigma is not positive definite");
  }
  const Eigen::VectorXd s = sigma.diagonal().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd corr = s.asDiagonal() * sigma * s.asDiagonal();
  corr = (0.5 * (corr + corr.transpose())).eval();
  corr.diagonal().setOnes();
  return corr;
}

double spearman_from_corr(double rho) {
  if (!(std::abs(rho) <= 1.0)) throw InputError("latent correlation must lie in [-1, 1]");
  return 6.0 / std::numbers::pi * std::asin(0.5 * rho);
}

Eigen::MatrixXd spearman_from_corr(const Eigen::MatrixXd& corr) {
  Eigen::MatrixXd out = corr.unaryExpr([](double r) { return spearman_from_corr(r); });
  out.diagonal().setOnes();
  return out;
}

namespace {

double quantile(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

/// Draws of the dependence parameter block from its asymptotic normal law.
class DependenceDraws {
 public:
  DependenceDraws(const FitResult& fit, const PropagationConfig& config)
      : spec_(fit.spec), layout_(fit.spec) {
    const int begin = layout_.lambda_begin();
    const int dim = layout_.size() - begin;
    mean_ = fit.theta_hat.tail(dim);
    draws_.resize(dim, config.draws);
    const Eigen::MatrixXd V = fit.vcov.bottomRightCorner(dim, dim);
    valid_ = dim > 0 && V.allFinite();
    if (!valid_) return;
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(V);
    const double scale = std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
    if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
      valid_ = false;
      return;
    }
    const Eigen::MatrixXd A = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
    RandomStream rng(config.seed, 0);
    Eigen::VectorXd z(dim);
    for (int d = 0; d < config.draws; ++d) {
      for (int k = 0; k < dim; ++k) z(k) = rng.normal();
      draws_.col(d) = mean_ + A * z;
    }
  }

  bool valid() const { return valid_; }
  int count() const { return static_cast<int>(draws_.cols()); }

  Eigen::VectorXd pair_values(const Eigen::VectorXd& block, std::optional<double> day) const {
    const int pairs = layout_.n_pairs();
    const int w = layout_.lambda_width();
    Eigen::VectorXd out(pairs);
    Eigen::VectorXd h;
    if (w > 1) h = spec_.design.harmonic_row(day.value_or(1.0));
    for (int p = 0; p < pairs; ++p) {
      out(p) = block(p * w);
      if (w > 1) out(p) += block.segment(p * w + 1, w - 1).dot(h);
    }
    return out;
  }

  Eigen::VectorXd draw(int d) const { return draws_.col(d); }
  const Eigen::VectorXd& mean() const { return mean_; }

 private:
  const ModelSpec& spec_;
  ParameterLayout layout_;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd draws_;
  bool valid_ = false;
};

Eigen::MatrixXd corr_at(int J, const Eigen::VectorXd& pair_values) {
  return corr_from_sigma(sigma_from_lambda(lambda_from_pairs(J, pair_values)));
}

}  // namespace

DependenceSummary summarize_dependence(const FitResult& fit, std::optional<double> day,
                                       const PropagationConfig& config) {
  const JointModel model = fit.model();
  const bool covariate = fit.spec.lambda_mode == LambdaMode::CovariateDependent;
  if (covariate && !day) throw InputError("covariate-dependent models need an evaluation day");
  if (!(config.level > 0.0 && config.level < 1.0)) throw InputError("CI level must lie in (0, 1)");
  const int J = model.n_species();

  DependenceSummary s;
  s.ci_level = config.level;
  s.evaluated_at = covariate ? day : std::nullopt;
  s.lambda = model.lambda_matrix(s.evaluated_at);
  s.sigma = sigma_from_lambda(s.lambda);
  s.corr = corr_from_sigma(s.sigma);
  s.spearman = spearman_from_corr(s.corr);

  const DependenceDraws draws(fit, config);
  const int pairs = fit.spec.n_pairs();
  std::vector<std::vector<double>> lam(pairs), cor(pairs), spe(pairs);
  if (draws.valid()) {
    for (int d = 0; d < draws.count(); ++d) {
      const Eigen::VectorXd values = draws.pair_values(draws.draw(d), s.evaluated_at);
      const Eigen::MatrixXd c = corr_at(J, values);
      for (int p = 0; p < pairs; ++p) {
        const auto sp = pair_at(p);
        lam[p].push_back(values(p));
        cor[p].push_back(c(sp.row, sp.col));
        spe[p].push_back(spearman_from_corr(c(sp.row, sp.col)));
      }
    }
  }
  const double a = 0.5 * (1.0 - config.level);
  const ParameterLayout layout(fit.spec);
  for (int p = 0; p < pairs; ++p) {
    const auto sp = pair_at(p);
    PairSummary ps;
    ps.row = sp.row;
    ps.col = sp.col;
    ps.lambda = s.lambda(sp.row, sp.col);
    ps.corr = s.corr(sp.row, sp.col);
    ps.spearman = s.spearman(sp.row, sp.col);
    if (!covariate && std::isfinite(fit.vcov(layout.lambda_offset(p), layout.lambda_offset(p))) &&
        fit.vcov(layout.lambda_offset(p), layout.lambda_offset(p)) >= 0.0) {
      const Interval w = wald_ci(fit, layout.lambda_offset(p), config.level);
      ps.lambda_lo = w.lower;
      ps.lambda_hi = w.upper;
    } else {
      ps.lambda_lo = quantile(lam[p], a);
      ps.lambda_hi = quantile(lam[p], 1.0 - a);
    }
    ps.corr_lo = quantile(cor[p], a);
    ps.corr_hi = quantile(cor[p], 1.0 - a);
    ps.spearman_lo = quantile(spe[p], a);
    ps.spearman_hi = quantile(spe[p], 1.0 - a);
    s.pairs.push_back(ps);
  }
  return s;
}

std::vector<TrajectoryPoint> trajectory(const FitResult& fit, SpeciesPair pair, const std::vector<double>& days,
                                        const PropagationConfig& config) {
  const int J = fit.spec.n_species();
  if (pair.col < 0 || pair.row <= pair.col || pair.row >= J) {
    throw InputError("species pair (" + std::to_string(pair.row) + ", " + std::to_string(pair.col) +
                     ") is out of range for " + std::to_string(J) + " species");
  }
  if (!(config.level > 0.0 && config.level < 1.0)) throw InputError("CI level must lie in (0, 1)");
  const DependenceDraws draws(fit, config);
  const double a = 0.5 * (1.0 - config.level);

  std::vector<TrajectoryPoint> out;
  out.reserve(days.size());
  std::vector<double> values;
  values.reserve(draws.count());
  for (double day : days) {
    const double at = day;  // ignored by constant-lambda layouts
    const Eigen::MatrixXd c = corr_at(J, draws.pair_values(draws.mean(), at));
    TrajectoryPoint pt;
    pt.day = day;
    pt.spearman = spearman_from_corr(c(pair.row, pair.col));
    values.clear();
    if (draws.valid()) {
      for (int d = 0; d < draws.count(); ++d) {
        const Eigen::MatrixXd cd = corr_at(J, draws.pair_values(draws.draw(d), at));
        values.push_back(spearman_from_corr(cd(pair.row, pair.col)));
      }
    }
    pt.lo = quantile(values, a);
    pt.hi = quantile(values, 1.0 - a);
    out.push_back(pt);
  }
  return out;
}

PermutationReport permutation_sensitivity(const ObservationTable& data, const ModelSpec& spec,
                                          LikelihoodKind kind, const FitOptions& fit_options,
                                          const PermutationOptions& options) {
  const int J = spec.n_species();
  if (J > options.max_species && !options.allow_more_species) {
    throw InputError("permutation check is capped at " + std::to_string(options.max_species) +
                     " species (" + std::to_string(J) + " given); pass an explicit override to run all orderings");
  }
  PermutationReport report;
  report.threshold = options.threshold;
  const bool covariate = spec.lambda_mode == LambdaMode::CovariateDependent;
  if (covariate) {
    report.days = options.days;
    if (report.days.empty()) {
      for (int d = 1; d <= kDaysPerYear; ++d) report.days.push_back(d);
    }
  }

  std::vector<int> order(J);
  std::iota(order.begin(), order.end(), 0);
  do {
    PermutationFit pf;
    pf.order = order;
    try {
      const FitResult f = fit(data.permuted(order), spec.permuted(order), kind, fit_options);
      pf.ok = true;
      pf.loglik = f.loglik;
      pf.converged = f.converged;
      const JointModel m = f.model();
      auto add = [&](std::optional<double> day) {
        const Eigen::MatrixXd sp = spearman_from_corr(corr_from_sigma(sigma_from_lambda(m.lambda_matrix(day))));
        Eigen::MatrixXd mapped(J, J);
        for (int a = 0; a < J; ++a) {
          for (int b = 0; b < J; ++b) mapped(order[a], order[b]) = sp(a, b);
        }
        pf.spearman.push_back(std::move(mapped));
      };
      if (covariate) {
        for (double d : report.days) add(d);
      } else {
        add(std::nullopt);
      }
    } catch (const std::exception& e) {
      pf.ok = false;
      pf.error = e.what();
    }
    report.fits.push_back(std::move(pf));
  } while (std::next_permutation(order.begin(), order.end()));

  for (std::size_t i = 0; i < report.fits.size(); ++i) {
    const auto& fi = report.fits[i];
    if (!fi.ok) continue;
    if (report.best < 0 || fi.loglik > report.fits[report.best].loglik) report.best = static_cast<int>(i);
    for (std::size_t k = i + 1; k < report.fits.size(); ++k) {
      const auto& fk = report.fits[k];
      if (!fk.ok) continue;
      for (std::size_t d = 0; d < fi.spearman.size(); ++d) {
        report.max_discrepancy =
            std::max(report.max_discrepancy, (fi.spearman[d] - fk.spearman[d]).cwiseAbs().maxCoeff());
      }
    }
  }
  report.order_sensitive = report.max_discrepancy > report.threshold;
  return report;
}

}  // namespace mctm
