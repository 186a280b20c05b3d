#include "mctm/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "mctm/errors.hpp"
#include "mctm/likelihood.hpp"
#include "mctm/normal.hpp"
#include "mctm/parallel.hpp"

namespace mctm {

namespace {

int integer_day(double day) {
  if (!(day >= 1.0 && day <= kDaysPerYear) || day != std::floor(day)) {
    throw InputError("simulation rows need an integer day in [1, 365], got " + std::to_string(day));
  }
  return static_cast<int>(day);
}

// Smallest y in [0, top] with alpha(y) - eta >= z, or top + 1 if none.
int generalized_inverse(const JointModel& model, int j, double eta, double z, int top) {
  int lo = 0, hi = top + 1;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (model.transform(j, mid) - eta >= z) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

double quantile_of(std::vector<double> v, double p) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double h = (v.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - lo) * (v[hi] - v[lo]);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t k = i;
    while (k + 1 < idx.size() && v[idx[k + 1]] == v[idx[i]]) ++k;
    const double r = 0.5 * static_cast<double>(i + k) + 1.0;
    for (std::size_t m = i; m <= k; ++m) ranks[idx[m]] = r;
    i = k + 1;
  }
  return ranks;
}

Eigen::VectorXd spearman_pairs(const JointModel& model, std::optional<double> day) {
  const Eigen::MatrixXd s = spearman_from_corr(corr_from_sigma(sigma_from_lambda(model.lambda_matrix(day))));
  Eigen::VectorXd out(model.spec().n_pairs());
  for (int p = 0; p < out.size(); ++p) {
    const auto sp = pair_at(p);
    out(p) = s(sp.row, sp.col);
  }
  return out;
}

}  // namespace

std::vector<int> sample_counts(const JointModel& model, const Covariates& x, RandomStream& rng,
                               std::size_t* truncations) {
  const int J = model.n_species();
  const bool covariate = model.spec().lambda_mode == LambdaMode::CovariateDependent;
  const Eigen::MatrixXd lambda = model.lambda_matrix(covariate ? std::optional<double>(x.day) : std::nullopt);

  Eigen::VectorXd w(J);
  for (int j = 0; j < J; ++j) w(j) = rng.normal();
  // Lambda Z = W gives Cov(Z) = Lambda^-1 Lambda^-T.
  const Eigen::VectorXd z = lambda.triangularView<Eigen::UnitLower>().solve(w);

  std::vector<int> counts(J);
  for (int j = 0; j < J; ++j) {
    const int top = static_cast<int>(std::floor(model.spec().support_hi[j]));
    const int y = generalized_inverse(model, j, model.shift(j, x), z(j), top);
    if (y > top) {
      counts[j] = top;
      if (truncations) ++*truncations;
    } else {
      counts[j] = y;
    }
  }
  return counts;
}

ObservationTable simulate_table(const JointModel& model, const std::vector<Covariates>& rows,
                                std::uint64_t seed, std::uint64_t stream, std::size_t* truncations) {
  RandomStream rng(seed, stream);
  std::vector<Observation> out;
  out.reserve(rows.size());
  for (const auto& x : rows) {
    out.push_back({x.year, integer_day(x.day), sample_counts(model, x, rng, truncations)});
  }
  Provenance prov;
  prov.source = "simulated";
  prov.rows_read = out.size();
  return ObservationTable(model.spec().species, std::move(out), prov);
}

BootstrapReport parametric_bootstrap(const FitResult& fit, const SimulationConfig& config,
                                     const BootstrapOptions& options) {
  if (!fit.converged) throw InputError("parametric bootstrap needs a converged fit");
  if (config.n_replicates < 1) throw InputError("at least one bootstrap replicate is required");
  if (config.covariate_schedule.empty()) throw InputError("bootstrap covariate schedule is empty");

  const JointModel truth = fit.model();
  const bool covariate = fit.spec.lambda_mode == LambdaMode::CovariateDependent;
  BootstrapReport report;
  if (covariate) {
    report.trajectory_days = options.trajectory_days;
    if (report.trajectory_days.empty()) {
      for (int d = 1; d <= kDaysPerYear; d += 7) report.trajectory_days.push_back(d);
    }
  }
  const std::optional<double> summary_day =
      covariate ? std::optional<double>(report.trajectory_days.front()) : std::nullopt;
  const int pairs = fit.spec.n_pairs();
  const int n_days = static_cast<int>(report.trajectory_days.size());
  report.truth_trajectories.resize(pairs, n_days);
  for (int d = 0; d < n_days; ++d) report.truth_trajectories.col(d) = spearman_pairs(truth, report.trajectory_days[d]);

  const int threads = options.threads > 0 ? options.threads : configured_threads();
  report.replicates.resize(config.n_replicates);
  parallel_for(static_cast<std::size_t>(config.n_replicates), [&](std::size_t r) {
    BootstrapReplicate& rep = report.replicates[r];
    rep.index = static_cast<int>(r);
    try {
      const ObservationTable table =
          simulate_table(truth, config.covariate_schedule, config.seed, r, &rep.truncations);
      FitOptions fo = options.fit;
      if (threads > 1) fo.threads = 1;
      if (options.warm_start) fo.start = fit.theta_hat;
      const FitResult refit = mctm::fit(table, fit.spec, fit.kind, fo);
      rep.converged = refit.converged;
      rep.loglik = refit.loglik;
      const DependenceSummary s = summarize_dependence(refit, summary_day, options.propagation);
      rep.spearman.resize(pairs);
      rep.spearman_lo.resize(pairs);
      rep.spearman_hi.resize(pairs);
      for (int p = 0; p < pairs; ++p) {
        rep.spearman(p) = s.pairs[p].spearman;
        rep.spearman_lo(p) = s.pairs[p].spearman_lo;
        rep.spearman_hi(p) = s.pairs[p].spearman_hi;
      }
      if (covariate) {
        const JointModel m = refit.model();
        rep.trajectories.resize(pairs, n_days);
        for (int d = 0; d < n_days; ++d) rep.trajectories.col(d) = spearman_pairs(m, report.trajectory_days[d]);
      }
      rep.ok = true;
    } catch (const std::exception& e) {
      rep.ok = false;
      rep.error = e.what();
    }
  }, threads);

  const Eigen::VectorXd truth_s = spearman_pairs(truth, summary_day);
  for (const auto& rep : report.replicates) report.failures += rep.ok ? 0 : 1;
  for (int p = 0; p < pairs; ++p) {
    const auto sp = pair_at(p);
    PairQuantiles q;
    q.row = sp.row;
    q.col = sp.col;
    q.truth = truth_s(p);
    std::vector<double> v;
    int covered = 0;
    for (const auto& rep : report.replicates) {
      if (!rep.ok) continue;
      v.push_back(rep.spearman(p));
      if (rep.spearman_lo(p) <= q.truth && q.truth <= rep.spearman_hi(p)) ++covered;
    }
    q.q025 = quantile_of(v, 0.025);
    q.q25 = quantile_of(v, 0.25);
    q.median = quantile_of(v, 0.5);
    q.q75 = quantile_of(v, 0.75);
    q.q975 = quantile_of(v, 0.975);
    q.mean = v.empty() ? std::numeric_limits<double>::quiet_NaN()
                       : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    q.coverage = v.empty() ? std::numeric_limits<double>::quiet_NaN()
                           : static_cast<double>(covered) / static_cast<double>(v.size());
    report.pairs.push_back(q);
  }
  return report;
}

ApproxComparison compare_approximations(const FitResult& fit_continuous, const FitResult& fit_discrete,
                                        const std::vector<Covariates>& schedule, int n_samples,
                                        std::uint64_t seed, const IntegratorConfig& integrator, int threads) {
  if (fit_continuous.kind != LikelihoodKind::ContinuousApprox) {
    throw InputError("first fit must use the continuous approximation");
  }
  if (fit_discrete.kind != LikelihoodKind::DiscreteApprox) {
    throw InputError("second fit must use the discrete approximation");
  }
  if (fit_continuous.spec.species != fit_discrete.spec.species ||
      fit_continuous.spec.support_hi != fit_discrete.spec.support_hi ||
      !(fit_continuous.spec.design == fit_discrete.spec.design) || fit_continuous.n_obs != fit_discrete.n_obs) {
    throw InputError("both fits must come from the same data and model structure");
  }
  if (fit_discrete.spec.n_species() > 3) throw InputError("the exact likelihood oracle supports at most 3 species");
  if (n_samples < 1) throw InputError("n_samples must be positive");
  if (schedule.empty()) throw InputError("comparison schedule is empty");

  const FitResult* fits[2] = {&fit_continuous, &fit_discrete};
  const JointModel models[2] = {fit_continuous.model(), fit_discrete.model()};
  ApproxComparison out;
  out.rows.resize(2 * static_cast<std::size_t>(n_samples));
  parallel_for(out.rows.size(), [&](std::size_t i) {
    const int k = static_cast<int>(i) / n_samples;
    ApproxComparisonRow& row = out.rows[i];
    row.sample = static_cast<int>(i) % n_samples;
    row.kind = fits[k]->kind;
    try {
      const ObservationTable table = simulate_table(models[k], schedule, seed, i);
      const PreparedData data(fits[k]->spec, table);
      LikelihoodOptions lo;
      lo.with_gradient = false;
      lo.threads = 1;
      row.approx_loglik = loglik(models[k], data, row.kind, lo).value;
      row.exact_loglik = loglik_exact(models[k], data, integrator);
      row.ok = std::isfinite(row.approx_loglik) && std::isfinite(row.exact_loglik);
      if (!row.ok) row.error = "non-finite log-likelihood";
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
  }, threads > 0 ? threads : configured_threads());

  std::vector<double> disc, cont;
  for (const auto& row : out.rows) {
    if (!row.ok) continue;
    const double gap = std::abs(row.approx_loglik - row.exact_loglik);
    (row.kind == LikelihoodKind::DiscreteApprox ? disc : cont).push_back(gap);
  }
  if (!disc.empty() && !cont.empty()) out.p_value = rank_test_less(disc, cont, &out.rank_statistic);
  return out;
}

double rank_test_less(const std::vector<double>& x, const std::vector<double>& y, double* u_statistic) {
  if (x.empty() || y.empty()) throw InputError("rank test needs two non-empty samples");
  std::vector<double> pooled(x);
  pooled.insert(pooled.end(), y.begin(), y.end());
  const std::vector<double> ranks = average_ranks(pooled);
  const double n1 = static_cast<double>(x.size()), n2 = static_cast<double>(y.size());
  const double n = n1 + n2;
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) rank_sum += ranks[i];
  const double u = rank_sum - n1 * (n1 + 1.0) / 2.0;
  if (u_statistic) *u_statistic = u;

  std::vector<double> sorted(pooled);
  std::sort(sorted.begin(), sorted.end());
  double ties = 0.0;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t k = i;
    while (k + 1 < sorted.size() && sorted[k + 1] == sorted[i]) ++k;
    const double t = static_cast<double>(k - i + 1);
    ties += t * t * t - t;
    i = k + 1;
  }
  const double var = n1 * n2 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
  if (var <= 0.0) return 1.0;
  const double z = (u - n1 * n2 / 2.0 + 0.5) / std::sqrt(var);
  return normal::cdf(z);
}

double spearman_rank_correlation(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InputError("rank correlation needs two equal-length samples");
  const std::vector<double> rx = average_ranks(x), ry = average_ranks(y);
  const Eigen::Map<const Eigen::VectorXd> a(rx.data(), rx.size()), b(ry.data(), ry.size());
  const Eigen::VectorXd ca = a.array() - a.mean(), cb = b.array() - b.mean();
  const double denom = ca.norm() * cb.norm();
  return denom > 0.0 ? ca.dot(cb) / denom : 0.0;
}

JointModel synth_birds_truth(int n_years, LambdaMode mode) {
  if (n_years < 1) throw InputError("n_years must be at least 1");
  std::vector<int> years(n_years);
  std::iota(years.begin(), years.end(), kSynthFirstYear);

  ModelSpec spec;
  spec.species = kSynthSpecies;
  spec.bernstein_coefs = {7, 7, 7};
  spec.support_hi = {150.0, 200.0, 80.0};
  spec.design = HarmonicDesign(3, years);
  spec.lambda_mode = mode;

  // Steep at the bottom, flat in the body: many small counts, occasional
  // large ones. The top coefficient keeps tail mass above the support tiny.
  const double theta[3][7] = {{-1.5, 0.3, 1.2, 1.9, 2.5, 3.0, 7.0},
                              {-1.2, 0.5, 1.4, 2.0, 2.6, 3.2, 7.5},
                              {-1.0, 0.2, 1.0, 1.7, 2.3, 2.9, 7.0}};
  // sin1, cos1, sin2, cos2, sin3, cos3: winter maxima, summer minima.
  const double season[3][6] = {{0.3, 1.0, 0.0, 0.2, 0.0, 0.0},
                               {-0.2, 1.2, 0.2, 0.0, 0.0, 0.1},
                               {0.4, 1.5, 0.0, 0.3, 0.1, 0.0}};
  std::vector<MarginalParams> marginals;
  for (int j = 0; j < 3; ++j) {
    MarginalParams m;
    m.theta = Eigen::Map<const Eigen::VectorXd>(theta[j], 7);
    m.beta = Eigen::VectorXd::Zero(spec.shift_width());
    for (int a = 0; a < spec.design.year_width(); ++a) m.beta(a) = 0.15 * std::sin(1.3 * (a + 1) + j);
    for (int h = 0; h < 6; ++h) m.beta(spec.design.year_width() + h) = season[j][h];
    marginals.push_back(std::move(m));
  }

  LambdaParams lambda;
  if (mode == LambdaMode::Constant) {
    lambda.tau = Eigen::Vector3d(-0.467, -0.202, -0.244);
  } else {
    // lambda(d) = tau (1 + cos(2 pi d / 365)): twice tau in winter, zero mid-year.
    lambda.tau = Eigen::Vector3d(-0.3, -0.2, -0.25);
    lambda.zeta = Eigen::MatrixXd::Zero(3, spec.design.harmonic_width());
    lambda.zeta.col(1) = lambda.tau;
  }
  return JointModel(spec, std::move(marginals), std::move(lambda));
}

std::vector<Covariates> synth_schedule(int n_years) {
  if (n_years < 1) throw InputError("n_years must be at least 1");
  std::vector<Covariates> rows;
  rows.reserve(static_cast<std::size_t>(n_years) * kDaysPerYear);
  for (int y = 0; y < n_years; ++y) {
    for (int d = 1; d <= kDaysPerYear; ++d) rows.push_back({kSynthFirstYear + y, static_cast<double>(d)});
  }
  return rows;
}

std::vector<RawObservation> synth_birds_raw(std::uint64_t seed, int n_years, double missing_rate,
                                            std::size_t* truncations) {
  if (!(missing_rate >= 0.0 && missing_rate < 1.0)) throw InputError("missing_rate must lie in [0, 1)");
  const JointModel truth = synth_birds_truth(n_years);
  const ObservationTable full = simulate_table(truth, synth_schedule(n_years), seed, 0, truncations);
  // Missingness uses its own stream so the counts do not depend on the rate.
  RandomStream gaps(seed, 1);
  std::vector<RawObservation> raw;
  raw.reserve(full.size());
  for (const auto& row : full.rows()) {
    RawObservation r{row.year, row.day, {}};
    for (int c : row.counts) r.counts.emplace_back(c);
    const double u = gaps.uniform();
    const double v = gaps.uniform();
    if (u < missing_rate) r.counts[static_cast<std::size_t>(v * r.counts.size())].reset();
    raw.push_back(std::move(r));
  }
  return raw;
}

ObservationTable synth_birds(std::uint64_t seed, int n_years, double missing_rate) {
  Provenance prov;
  prov.source = "synth_birds(seed=" + std::to_string(seed) + ")";
  return complete_cases(kSynthSpecies, synth_birds_raw(seed, n_years, missing_rate), prov);
}

}  // namespace mctm
