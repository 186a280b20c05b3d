#include "mctm/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/special_functions/gamma.hpp>

#include "mctm/errors.hpp"
#include "mctm/normal.hpp"
#include "mctm/parallel.hpp"

namespace mctm {

namespace {

ModelSpec single_species_spec(const ModelSpec& spec, int j) {
  ModelSpec s = spec;
  s.species = {spec.species.at(j)};
  s.bernstein_coefs = {spec.bernstein_coefs.at(j)};
  s.support_hi = {spec.support_hi.at(j)};
  s.lambda_mode = LambdaMode::Constant;
  return s;
}

// Coefficients that put alpha near Phi^-1(ECDF) at the Bernstein grid.
Eigen::VectorXd ecdf_start(const ObservationTable& data, int j, const BernsteinBasis& basis) {
  const int P = basis.size();
  std::vector<int> ys;
  ys.reserve(data.size());
  for (const auto& r : data.rows()) ys.push_back(r.counts[j]);
  std::sort(ys.begin(), ys.end());
  Eigen::VectorXd theta(P);
  const double n = static_cast<double>(ys.size());
  for (int p = 0; p < P; ++p) {
    const double grid = P == 1 ? basis.hi() : basis.lo() + (basis.hi() - basis.lo()) * p / (P - 1);
    const auto le = std::upper_bound(ys.begin(), ys.end(), static_cast<int>(std::floor(grid))) - ys.begin();
    const double ecdf = std::clamp((le + 0.5) / (n + 1.0), 1e-3, 1.0 - 1e-3);
    theta(p) = normal::quantile(ecdf);
    if (p > 0) theta(p) = std::max(theta(p), theta(p - 1) + 0.05);
  }
  return theta;
}

class FitProblem {
 public:
  FitProblem(const ModelSpec& spec, const PreparedData& data, LikelihoodKind kind, int threads)
      : spec_(spec), data_(data), kind_(kind), threads_(threads) {}

  // Negative log-likelihood in the unconstrained space.
  double operator()(const Eigen::VectorXd& free, Eigen::VectorXd* gradient) const {
    const Eigen::VectorXd packed = reparam::from_unconstrained(spec_, free);
    const JointModel model = JointModel::from_packed(spec_, packed);
    LikelihoodOptions opts;
    opts.with_gradient = gradient != nullptr;
    opts.threads = threads_;
    const auto r = loglik(model, data_, kind_, opts);
    if (gradient) *gradient = -reparam::pullback_gradient(spec_, free, r.gradient);
    return -r.value;
  }

  const ModelSpec& spec() const noexcept { return spec_; }

  Eigen::VectorXd gradient(const Eigen::VectorXd& free) const {
    Eigen::VectorXd g(free.size());
    (*this)(free, &g);
    return g;
  }

  // Central differences of the analytic gradient, symmetrized.
  Eigen::MatrixXd hessian(const Eigen::VectorXd& free, double step) const {
    const auto n = free.size();
    Eigen::MatrixXd H(n, n);
    parallel_for(
        static_cast<std::size_t>(n),
        [&](std::size_t ii) {
          const auto i = static_cast<Eigen::Index>(ii);
          const double h = step * std::max(1.0, std::abs(free(i)));
          Eigen::VectorXd up = free, down = free;
          up(i) += h;
          down(i) -= h;
          H.col(i) = (gradient(up) - gradient(down)) / (2.0 * h);
        },
        threads_);
    return 0.5 * (H + H.transpose());
  }

 private:
  const ModelSpec& spec_;
  const PreparedData& data_;
  LikelihoodKind kind_;
  int threads_;
};

void check_not_constant(const ObservationTable& data, const ModelSpec& spec) {
  for (int j = 0; j < spec.n_species(); ++j) {
    if (data.size() > 0 && data.min_count(j) == data.max_count(j)) {
      throw InputError("species '" + spec.species[j] + "' is constant in the data (all counts equal " +
                       std::to_string(data.max_count(j)) + "); cannot fit its transformation");
    }
  }
}


// exp(-12) ~ 6e-6: increments this small are numerically zero.
constexpr double kBoundaryLogIncrement = -12.0;

// Log-increments below kSnapLogIncrement that still point downhill are solved
// one coordinate at a time: the log map reaches a zero increment only one
// factor of e per Newton step.
constexpr double kSnapLogIncrement = -4.0;
constexpr double kPinnedLogIncrement = -30.0;

std::vector<Eigen::Index> log_increment_indices(const ModelSpec& spec) {
  const ParameterLayout layout(spec);
  std::vector<Eigen::Index> out;
  for (int j = 0; j < spec.n_species(); ++j) {
    for (int p = 1; p < layout.theta_size(j); ++p) out.push_back(layout.theta_offset(j) + p);
  }
  return out;
}

// Increments near the monotonicity boundary have curvature of the order of
// the increment itself, below the noise of the numeric Hessian. Each is
// solved on its own: moved onto the boundary when the objective still falls
// there, otherwise to the root of its gradient by bracketing and bisection.
void polish_boundary(const FitProblem& problem, double gtol, Eigen::VectorXd& free, Eigen::VectorXd& grad,
                     double& value, bool& have_hessian) {
  auto eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    try {
      const double v = problem(x, &g);
      return std::isfinite(v) && g.allFinite() ? v : std::numeric_limits<double>::infinity();
    } catch (const std::exception&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  for (const Eigen::Index i : log_increment_indices(problem.spec())) {
    if (!(free(i) < kSnapLogIncrement && free(i) > kPinnedLogIncrement && std::abs(grad(i)) >= gtol)) continue;
    Eigen::VectorXd x = free, g(free.size());
    double v = std::numeric_limits<double>::infinity();
    double lo = free(i), hi = free(i);
    bool bracketed = false;
    if (grad(i) > 0.0) {
      lo = x(i) = kPinnedLogIncrement;
      v = eval(x, g);
      bracketed = std::isfinite(v) && g(i) < 0.0;
    } else {
      for (int k = 0; k < 8 && !bracketed; ++k) {
        hi = x(i) = lo + std::ldexp(1.0, k);
        v = eval(x, g);
        if (!std::isfinite(v)) break;
        if (g(i) > 0.0) bracketed = true;
        else lo = hi;
      }
    }
    for (int it = 0; bracketed && it < 60 && hi - lo > 1e-10; ++it) {
      x(i) = 0.5 * (lo + hi);
      v = eval(x, g);
      if (!std::isfinite(v)) break;
      (g(i) < 0.0 ? lo : hi) = x(i);
    }
    if (std::isfinite(v) && v <= value + 1e-12 * std::abs(value)) {
      free = x;
      grad = g;
      value = v;
      have_hessian = false;
    }
  }
}

// Newton steps with a line search on the coordinates off the monotonicity
// boundary. An indefinite Hessian has its spectrum reflected and floored so
// the step is still a descent direction.
void newton_polish(const FitProblem& problem, const FitOptions& options, Eigen::VectorXd& free,
                   Eigen::VectorXd& grad, double& value, Eigen::MatrixXd& H, bool& have_hessian) {
  const double gtol = options.optimizer.gradient_tolerance;
  const std::vector<Eigen::Index> increments = log_increment_indices(problem.spec());
  for (int step = 0; step < options.optimizer.polish_steps && std::isfinite(value) &&
                     grad.lpNorm<Eigen::Infinity>() >= gtol;
       ++step) {
    polish_boundary(problem, gtol, free, grad, value, have_hessian);
    if (grad.lpNorm<Eigen::Infinity>() < gtol) break;
    H = problem.hessian(free, options.hessian_step);
    have_hessian = true;
    std::vector<bool> pinned(static_cast<std::size_t>(free.size()), false);
    for (const Eigen::Index i : increments) pinned[static_cast<std::size_t>(i)] = free(i) < kBoundaryLogIncrement;
    std::vector<Eigen::Index> active;
    for (Eigen::Index i = 0; i < free.size(); ++i) {
      if (!pinned[static_cast<std::size_t>(i)]) active.push_back(i);
    }
    const Eigen::MatrixXd Ha = H(active, active);
    const Eigen::VectorXd ga = grad(active);
    Eigen::VectorXd da;
    const Eigen::LLT<Eigen::MatrixXd> llt(Ha);
    if (llt.info() == Eigen::Success) {
      da = -llt.solve(ga);
    } else {
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(Ha);
      const double top = std::max(eig.eigenvalues().cwiseAbs().maxCoeff(), 1e-12);
      const Eigen::VectorXd d = eig.eigenvalues().cwiseAbs().cwiseMax(1e-6 * top);
      da = -eig.eigenvectors() * (eig.eigenvectors().transpose() * ga).cwiseQuotient(d);
    }
    Eigen::VectorXd dir = Eigen::VectorXd::Zero(free.size());
    dir(active) = da;
    bool accepted = false;
    for (double t = 1.0; t > 1e-6; t *= 0.5) {
      const Eigen::VectorXd trial = free + t * dir;
      Eigen::VectorXd g(trial.size());
      double v;
      try {
        v = problem(trial, &g);
      } catch (const std::exception&) {
        continue;
      }
      if (std::isfinite(v) && g.allFinite() &&
          (v < value || (v <= value + 1e-12 * std::abs(value) &&
                         g.lpNorm<Eigen::Infinity>() < grad.lpNorm<Eigen::Infinity>()))) {
        free = trial;
        grad = g;
        value = v;
        accepted = true;
        have_hessian = false;
        break;
      }
    }
    if (!accepted) break;
  }
}

}  // namespace

FitResult fit(const ObservationTable& data, const ModelSpec& spec, LikelihoodKind kind,
              const FitOptions& options) {
  if (kind == LikelihoodKind::ExactOracle) {
    throw InputError("the exact likelihood is evaluation-only and cannot be used for fitting");
  }
  if (data.size() == 0) throw InputError("cannot fit an empty table");
  spec.validate();
  check_not_constant(data, spec);
  const PreparedData prepared(spec, data);
  const ParameterLayout layout(spec);

  Eigen::VectorXd start;
  if (options.start) {
    start = *options.start;
    if (start.size() != layout.size()) throw InputError("start vector does not match the parameter layout");
  } else {
    start = Eigen::VectorXd::Zero(layout.size());
    for (int j = 0; j < spec.n_species(); ++j) {
      FitOptions marginal_opts = options;
      marginal_opts.compute_vcov = false;
      marginal_opts.start.reset();
      const FitResult m = fit_marginal(data, spec, j, marginal_opts);
      const ParameterLayout ml(m.spec);
      start.segment(layout.theta_offset(j), layout.theta_size(j)) = m.theta_hat.segment(ml.theta_offset(0), ml.theta_size(0));
      start.segment(layout.beta_offset(j), layout.beta_size()) = m.theta_hat.segment(ml.beta_offset(0), ml.beta_size());
    }
  }

  const FitProblem problem(spec, prepared, kind, options.threads);
  Eigen::VectorXd free0 = reparam::to_unconstrained(spec, start);
  FitResult out;
  out.spec = spec;
  out.kind = kind;
  out.n_obs = data.size();
  out.loglik_start = -problem(free0, nullptr);

  const Objective objective = [&problem](const Eigen::VectorXd& x, Eigen::VectorXd* g) { return problem(x, g); };
  OptimizerResult opt = minimize_bfgs(objective, free0, options.optimizer);
  Eigen::VectorXd free = opt.x;
  Eigen::VectorXd grad = opt.gradient;
  double value = opt.value;
  const double gtol = options.optimizer.gradient_tolerance;

  Eigen::MatrixXd H;
  bool have_hessian = false;
  // BFGS stops on relative change long before the gradient of a large-N
  // objective reaches the tolerance; Newton steps on the numeric Hessian
  // finish the job. A fresh BFGS run follows if Newton makes no progress.
  for (int round = 0; round < 3; ++round) {
    const double before = value;
    newton_polish(problem, options, free, grad, value, H, have_hessian);
    if (!std::isfinite(value) || grad.lpNorm<Eigen::Infinity>() < gtol || round == 2) break;
    const OptimizerResult again = minimize_bfgs(objective, free, options.optimizer);
    opt.iterations += again.iterations;
    if (!(again.value < value)) {
      if (!(value < before)) break;
      continue;
    }
    free = again.x;
    grad = again.gradient;
    value = again.value;
    opt.message = again.message;
    have_hessian = false;
  }

  out.theta_hat = reparam::from_unconstrained(spec, free);
  out.loglik = -value;
  out.iterations = opt.iterations;
  out.gradient_norm = grad.lpNorm<Eigen::Infinity>();
  out.converged = std::isfinite(value) && out.gradient_norm < gtol;
  out.message = out.converged ? "converged" : opt.message;
  out.floored_cells = loglik(out.model(), prepared, kind, {.with_gradient = false}).floored_cells;

  const auto n = layout.size();
  out.vcov = Eigen::MatrixXd::Constant(n, n, std::numeric_limits<double>::quiet_NaN());
  if (options.compute_vcov) {
    try {
      if (!have_hessian) H = problem.hessian(free, options.hessian_step);
      const Eigen::MatrixXd J = reparam::jacobian(spec, free);
      // Bernstein increments pinned at the monotonicity boundary (log
      // increment far below zero) have a flat likelihood direction; they are
      // held fixed, i.e. get zero variance, and the rest is inverted.
      std::vector<Eigen::Index> keep;
      for (int j = 0; j < spec.n_species(); ++j) {
        for (int p = 0; p < layout.theta_size(j); ++p) {
          const Eigen::Index i = layout.theta_offset(j) + p;
          if (p == 0 || free(i) > kBoundaryLogIncrement) keep.push_back(i);
        }
        for (int b = 0; b < layout.beta_size(); ++b) keep.push_back(layout.beta_offset(j) + b);
      }
      for (Eigen::Index i = layout.lambda_begin(); i < layout.size(); ++i) keep.push_back(i);
      const Eigen::MatrixXd Hr = H(keep, keep);
      const Eigen::MatrixXd Jr = J(Eigen::all, keep);
      const Eigen::LLT<Eigen::MatrixXd> llt(Hr);
      if (llt.info() == Eigen::Success) {
        out.hessian_pd = true;
        out.vcov = Jr * llt.solve(Jr.transpose());
      } else {
        const Eigen::FullPivLU<Eigen::MatrixXd> lu(Hr);
        if (lu.isInvertible()) out.vcov = Jr * lu.inverse() * Jr.transpose();
      }
      out.vcov = (0.5 * (out.vcov + out.vcov.transpose())).eval();
    } catch (const std::exception&) {
      out.hessian_pd = false;
    }
  }
  return out;
}

FitResult fit_marginal(const ObservationTable& data, const ModelSpec& spec, int species,
                       const FitOptions& options) {
  if (species < 0 || species >= spec.n_species()) throw InputError("species index out of range");
  const ModelSpec single = single_species_spec(spec, species);
  const ObservationTable column = [&] {
    std::vector<Observation> rows;
    rows.reserve(data.size());
    for (const auto& r : data.rows()) rows.push_back({r.year, r.day, {r.counts.at(species)}});
    return ObservationTable({spec.species.at(species)}, std::move(rows), data.provenance());
  }();
  FitOptions opts = options;
  if (!opts.start) {
    Eigen::VectorXd start = Eigen::VectorXd::Zero(ParameterLayout(single).size());
    start.head(single.bernstein_coefs[0]) = ecdf_start(column, 0, single.basis(0));
    opts.start = start;
  }
  return fit(column, single, LikelihoodKind::DiscreteApprox, opts);
}

Eigen::VectorXd embed_constant_lambda(const ModelSpec& constant_spec, const Eigen::VectorXd& theta) {
  const ModelSpec cov = constant_spec.with_lambda_mode(LambdaMode::CovariateDependent);
  const ParameterLayout from(constant_spec), to(cov);
  if (theta.size() != from.size()) throw InputError("theta does not match the constant-lambda layout");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(to.size());
  out.head(from.lambda_begin()) = theta.head(from.lambda_begin());
  for (int p = 0; p < from.n_pairs(); ++p) out(to.lambda_offset(p)) = theta(from.lambda_offset(p));
  return out;
}

Interval wald_ci(const FitResult& fit, int param_index, double level) {
  if (param_index < 0 || param_index >= fit.n_params()) throw InputError("parameter index out of range");
  if (!(level >= 0.0 && level < 1.0)) throw InputError("confidence level must lie in [0, 1)");
  const double var = fit.vcov(param_index, param_index);
  if (!(var >= 0.0)) {
    throw EvaluationError(std::string("variance of parameter ") + std::to_string(param_index) +
                          " is negative or undefined" +
                          (fit.hessian_pd ? "" : " (Hessian flagged as not positive definite)"));
  }
  const double z = level == 0.0 ? 0.0 : normal::quantile(0.5 * (1.0 + level));
  const double est = fit.theta_hat(param_index);
  const double half = z * std::sqrt(var);
  return {est - half, est + half};
}

double chi_squared_upper(double statistic, int df) {
  if (df <= 0) throw InputError("chi-squared test needs positive degrees of freedom");
  if (!(statistic > 0.0)) return 1.0;
  return boost::math::gamma_q(0.5 * df, 0.5 * statistic);
}

LrTestResult lr_test(double loglik_null, double loglik_alt, int df) {
  LrTestResult r;
  r.df = df;
  r.statistic = 2.0 * (loglik_alt - loglik_null);
  if (r.statistic < 0.0) {
    r.warning = "alternative log-likelihood is below the null; the alternative fit likely failed to converge";
    r.p_value = 1.0;
  } else {
    r.p_value = chi_squared_upper(r.statistic, df);
  }
  return r;
}

LrTestResult lr_test(const FitResult& fit_null, const FitResult& fit_alt) {
  if (fit_null.kind != fit_alt.kind) throw InputError("LR test needs fits with the same likelihood kind");
  if (fit_null.n_obs != fit_alt.n_obs) throw InputError("LR test needs fits on the same data");
  const int df = fit_alt.n_params() - fit_null.n_params();
  if (df <= 0) throw InputError("alternative model must have more parameters than the null");
  return lr_test(fit_null.loglik, fit_alt.loglik, df);
}

}  // namespace mctm
