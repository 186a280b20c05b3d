#include "mctm/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "mctm/errors.hpp"
#include "mctm/normal.hpp"

namespace mctm {

std::string to_string(Link link) {
  switch (link) {
    case Link::Normal: return "normal";
    case Link::Logistic: return "logistic";
    case Link::MinExtremeValue: return "minextrval";
    case Link::MaxExtremeValue: return "maxextrval";
  }
  return "unknown";
}

std::string to_string(LambdaMode mode) {
  return mode == LambdaMode::Constant ? "constant" : "covariate";
}

Link link_from_string(const std::string& s) {
  if (s == "normal") return Link::Normal;
  if (s == "logistic") return Link::Logistic;
  if (s == "minextrval") return Link::MinExtremeValue;
  if (s == "maxextrval") return Link::MaxExtremeValue;
  throw InputError("unknown link '" + s + "'");
}

LambdaMode lambda_mode_from_string(const std::string& s) {
  if (s == "constant") return LambdaMode::Constant;
  if (s == "covariate") return LambdaMode::CovariateDependent;
  throw InputError("unknown lambda mode '" + s + "' (expected constant or covariate)");
}

SpeciesPair pair_at(int index) {
  int row = 1;
  while (pair_index(row + 1, 0) <= index) ++row;
  return {row, index - pair_index(row, 0)};
}

// ---------------------------------------------------------------------------
// ModelSpec

BernsteinBasis ModelSpec::basis(int j) const {
  return BernsteinBasis(bernstein_coefs.at(j), 0.0, support_hi.at(j));
}

int ModelSpec::species_index(const std::string& name) const {
  const auto it = std::find(species.begin(), species.end(), name);
  if (it == species.end()) throw InputError("unknown species '" + name + "'");
  return static_cast<int>(it - species.begin());
}

void ModelSpec::validate() const {
  const auto j = species.size();
  if (j == 0) throw InputError("model needs at least one species");
  if (bernstein_coefs.size() != j || support_hi.size() != j) {
    throw InputError("per-species Bernstein order and support must match the species count");
  }
  for (std::size_t k = 0; k < j; ++k) (void)basis(static_cast<int>(k));
}

ModelSpec ModelSpec::permuted(const std::vector<int>& order) const {
  ModelSpec out = *this;
  for (std::size_t a = 0; a < order.size(); ++a) {
    out.species[a] = species.at(order[a]);
    out.bernstein_coefs[a] = bernstein_coefs.at(order[a]);
    out.support_hi[a] = support_hi.at(order[a]);
  }
  return out;
}

ModelSpec ModelSpec::with_lambda_mode(LambdaMode mode) const {
  ModelSpec out = *this;
  out.lambda_mode = mode;
  return out;
}

ModelSpec make_spec(const ObservationTable& table, int bernstein_coefs, int harmonics,
                    LambdaMode mode) {
  if (table.size() == 0) throw InputError("cannot build a model from an empty table");
  ModelSpec spec{table.species(),
                 std::vector<int>(table.n_species(), bernstein_coefs),
                 {},
                 HarmonicDesign(harmonics, table.years()),
                 mode,
                 Link::Normal};
  for (int j = 0; j < table.n_species(); ++j) {
    if (table.min_count(j) == table.max_count(j)) {
      throw InputError("species '" + table.species()[j] + "' is constant (all counts equal " +
                       std::to_string(table.max_count(j)) + "); its transformation is not identified");
    }
    spec.support_hi.push_back(static_cast<double>(table.max_count(j)));
  }
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------
// ParameterLayout

ParameterLayout::ParameterLayout(const ModelSpec& spec) {
  int offset = 0;
  beta_size_ = spec.shift_width();
  for (int j = 0; j < spec.n_species(); ++j) {
    theta_offset_.push_back(offset);
    theta_size_.push_back(spec.bernstein_coefs.at(j));
    offset += spec.bernstein_coefs.at(j);
    beta_offset_.push_back(offset);
    offset += beta_size_;
  }
  lambda_offset_ = offset;
  lambda_width_ = spec.lambda_width();
  n_pairs_ = spec.n_pairs();
  size_ = offset + n_pairs_ * lambda_width_;
}

std::vector<std::string> ParameterLayout::names(const ModelSpec& spec) const {
  std::vector<std::string> out(size_);
  const auto& years = spec.design.years();
  for (int j = 0; j < spec.n_species(); ++j) {
    const std::string& s = spec.species[j];
    for (int p = 0; p < theta_size(j); ++p) {
      out[theta_offset(j) + p] = s + ".theta" + std::to_string(p + 1);
    }
    int b = beta_offset(j);
    for (std::size_t y = 1; y < years.size(); ++y) out[b++] = s + ".year" + std::to_string(years[y]);
    for (int k = 1; k <= spec.design.harmonics(); ++k) {
      out[b++] = s + ".sin" + std::to_string(k);
      out[b++] = s + ".cos" + std::to_string(k);
    }
  }
  for (int p = 0; p < n_pairs_; ++p) {
    const auto sp = pair_at(p);
    const std::string tag = "lambda[" + spec.species[sp.row] + "," + spec.species[sp.col] + "]";
    int o = lambda_offset(p);
    out[o++] = tag + ".tau";
    for (int k = 1; k < lambda_width_; k += 2) {
      out[o++] = tag + ".sin" + std::to_string(k / 2 + 1);
      out[o++] = tag + ".cos" + std::to_string(k / 2 + 1);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// JointModel

JointModel::JointModel(ModelSpec spec, std::vector<MarginalParams> marginals, LambdaParams lambda)
    : spec_(std::move(spec)), marginals_(std::move(marginals)), lambda_(std::move(lambda)) {
  spec_.validate();
  const int J = spec_.n_species();
  if (static_cast<int>(marginals_.size()) != J) throw ParameterError("one MarginalParams per species required");
  for (int j = 0; j < J; ++j) {
    const auto& m = marginals_[j];
    if (m.theta.size() != spec_.bernstein_coefs[j]) {
      throw ParameterError("species '" + spec_.species[j] + "': theta has wrong length");
    }
    if (m.beta.size() != spec_.shift_width()) {
      throw ParameterError("species '" + spec_.species[j] + "': beta has wrong length");
    }
    if (!m.theta.allFinite() || !m.beta.allFinite()) {
      throw ParameterError("species '" + spec_.species[j] + "': non-finite parameters");
    }
    for (int p = 1; p < m.theta.size(); ++p) {
      if (m.theta(p) < m.theta(p - 1)) {
        throw ParameterError("species '" + spec_.species[j] +
                             "': Bernstein coefficients must be non-decreasing (theta[" +
                             std::to_string(p) + "] < theta[" + std::to_string(p - 1) + "])");
      }
    }
    bases_.push_back(spec_.basis(j));
  }
  const int pairs = spec_.n_pairs();
  if (lambda_.tau.size() != pairs) throw ParameterError("tau must have one entry per species pair");
  const int zw = spec_.lambda_mode == LambdaMode::Constant ? 0 : spec_.design.harmonic_width();
  if (lambda_.zeta.size() == 0) lambda_.zeta = Eigen::MatrixXd::Zero(pairs, zw);
  if (lambda_.zeta.rows() != pairs || lambda_.zeta.cols() != zw) {
    throw ParameterError("zeta must be pairs x 2S in covariate mode and empty otherwise");
  }
  if (!lambda_.tau.allFinite() || !lambda_.zeta.allFinite()) {
    throw ParameterError("non-finite dependence parameters");
  }
}

JointModel JointModel::from_packed(const ModelSpec& spec, const Eigen::VectorXd& packed) {
  const ParameterLayout layout(spec);
  if (packed.size() != layout.size()) {
    throw ParameterError("packed parameter vector has length " + std::to_string(packed.size()) +
                         ", layout expects " + std::to_string(layout.size()));
  }
  std::vector<MarginalParams> marginals;
  for (int j = 0; j < spec.n_species(); ++j) {
    marginals.push_back({packed.segment(layout.theta_offset(j), layout.theta_size(j)),
                         packed.segment(layout.beta_offset(j), layout.beta_size())});
  }
  const int pairs = spec.n_pairs();
  const int zw = layout.lambda_width() - 1;
  LambdaParams lambda{Eigen::VectorXd(pairs), Eigen::MatrixXd(pairs, zw)};
  for (int p = 0; p < pairs; ++p) {
    lambda.tau(p) = packed(layout.lambda_offset(p));
    if (zw > 0) lambda.zeta.row(p) = packed.segment(layout.lambda_offset(p) + 1, zw).transpose();
  }
  return JointModel(spec, std::move(marginals), std::move(lambda));
}

Eigen::VectorXd JointModel::pack() const {
  const ParameterLayout layout(spec_);
  Eigen::VectorXd out(layout.size());
  for (int j = 0; j < n_species(); ++j) {
    out.segment(layout.theta_offset(j), layout.theta_size(j)) = marginals_[j].theta;
    out.segment(layout.beta_offset(j), layout.beta_size()) = marginals_[j].beta;
  }
  const int zw = layout.lambda_width() - 1;
  for (int p = 0; p < spec_.n_pairs(); ++p) {
    out(layout.lambda_offset(p)) = lambda_.tau(p);
    if (zw > 0) out.segment(layout.lambda_offset(p) + 1, zw) = lambda_.zeta.row(p).transpose();
  }
  return out;
}

void JointModel::require_normal_link() const {
  if (spec_.link != Link::Normal) {
    throw UnsupportedLinkError("inverse link '" + to_string(spec_.link) +
                               "' is not supported; only the standard normal link is implemented");
  }
}

double JointModel::transform(int j, double y) const {
  return bases_.at(j).eval(y).dot(marginals_[j].theta);
}

double JointModel::transform_cutoff(int j, double y) const {
  const auto row = bases_.at(j).eval_cutoff(y);
  if (!row) return -std::numeric_limits<double>::infinity();
  return row->dot(marginals_[j].theta);
}

double JointModel::shift(int j, const Covariates& x) const {
  if (j < 0 || j >= n_species()) throw InputError("unknown species index " + std::to_string(j));
  return spec_.design.shift_row(x.year, x.day).dot(marginals_[j].beta);
}

double JointModel::marginal_cdf(int j, double y, const Covariates& x) const {
  require_normal_link();
  const double eta = shift(j, x);
  const double a = transform_cutoff(j, y);
  if (std::isinf(a)) return 0.0;
  return normal::cdf(a - eta);
}

double JointModel::marginal_pmf(int j, double y, const Covariates& x) const {
  if (!std::isfinite(y) || y != std::floor(y)) {
    throw InputError("marginal_pmf needs an integer count, got " + std::to_string(y));
  }
  if (y < 0) throw InputError("marginal_pmf needs a non-negative count");
  require_normal_link();
  const double eta = shift(j, x);
  const double upper = transform_cutoff(j, y) - eta;
  const double lower = transform_cutoff(j, y - 1.0) - eta;
  return normal::interval(lower, upper);
}

double JointModel::tail_mass(int j, const Covariates& x) const {
  require_normal_link();
  return normal::ccdf(transform(j, bases_.at(j).hi()) - shift(j, x));
}

double JointModel::marginal_auc(int j, const Covariates& x, const Covariates& x_ref) const {
  require_normal_link();
  return normal::cdf((shift(j, x) - shift(j, x_ref)) / std::numbers::sqrt2);
}

int JointModel::marginal_quantile(int j, double p, const Covariates& x) const {
  if (!(p > 0.0 && p < 1.0)) throw InputError("quantile level must lie in (0, 1)");
  require_normal_link();
  const double eta = shift(j, x);
  const double target = normal::quantile(p) + eta;  // need alpha(y) >= target
  int lo = 0;
  int hi = static_cast<int>(std::floor(bases_.at(j).hi()));
  if (transform(j, hi) < target) return hi;
  while (lo < hi) {
    const int mid = lo + (hi - lo) / 2;
    if (transform(j, mid) >= target) hi = mid; else lo = mid + 1;
  }
  return lo;
}

double JointModel::lambda_entry(int pair, std::optional<double> day) const {
  if (pair < 0 || pair >= spec_.n_pairs()) throw InputError("lambda pair out of range");
  double v = lambda_.tau(pair);
  if (spec_.lambda_mode == LambdaMode::CovariateDependent) {
    if (!day) throw InputError("covariate-dependent lambda requires a day of year");
    v += lambda_.zeta.row(pair).dot(spec_.design.harmonic_row(*day));
  }
  return v;
}

Eigen::MatrixXd JointModel::lambda_matrix(std::optional<double> day) const {
  const int J = n_species();
  Eigen::VectorXd values(spec_.n_pairs());
  for (int p = 0; p < spec_.n_pairs(); ++p) values(p) = lambda_entry(p, day);
  return lambda_from_pairs(J, values);
}

Eigen::MatrixXd lambda_from_pairs(int n_species, const Eigen::VectorXd& pair_values) {
  if (pair_values.size() != pair_count(n_species)) throw InputError("pair value count mismatch");
  Eigen::MatrixXd L = Eigen::MatrixXd::Identity(n_species, n_species);
  for (int r = 1; r < n_species; ++r) {
    for (int c = 0; c < r; ++c) L(r, c) = pair_values(pair_index(r, c));
  }
  return L;
}

// ---------------------------------------------------------------------------
// reparam

namespace reparam {

namespace {
constexpr double kMinIncrement = 1e-12;
}

Eigen::VectorXd to_unconstrained(const ModelSpec& spec, const Eigen::VectorXd& packed) {
  const ParameterLayout layout(spec);
  Eigen::VectorXd out = packed;
  for (int j = 0; j < spec.n_species(); ++j) {
    const int o = layout.theta_offset(j);
    for (int p = 1; p < layout.theta_size(j); ++p) {
      const double inc = packed(o + p) - packed(o + p - 1);
      if (!(inc >= 0.0)) {
        throw ParameterError("species '" + spec.species[j] + "': Bernstein coefficients must be non-decreasing");
      }
      // Ties arise when a fitted increment underflows against its neighbour.
      out(o + p) = std::log(std::max(inc, kMinIncrement));
    }
  }
  return out;
}

Eigen::VectorXd from_unconstrained(const ModelSpec& spec, const Eigen::VectorXd& free) {
  const ParameterLayout layout(spec);
  Eigen::VectorXd out = free;
  for (int j = 0; j < spec.n_species(); ++j) {
    const int o = layout.theta_offset(j);
    for (int p = 1; p < layout.theta_size(j); ++p) out(o + p) = out(o + p - 1) + std::exp(free(o + p));
  }
  return out;
}

Eigen::VectorXd pullback_gradient(const ModelSpec& spec, const Eigen::VectorXd& free,
                                  const Eigen::VectorXd& packed_gradient) {
  const ParameterLayout layout(spec);
  Eigen::VectorXd out = packed_gradient;
  for (int j = 0; j < spec.n_species(); ++j) {
    const int o = layout.theta_offset(j);
    const int n = layout.theta_size(j);
    // theta_q depends on gamma_p for all q >= p
    double tail = 0.0;
    for (int p = n - 1; p >= 1; --p) {
      tail += packed_gradient(o + p);
      out(o + p) = tail * std::exp(free(o + p));
    }
    out(o) = tail + packed_gradient(o);
  }
  return out;
}

Eigen::MatrixXd jacobian(const ModelSpec& spec, const Eigen::VectorXd& free) {
  const ParameterLayout layout(spec);
  Eigen::MatrixXd J = Eigen::MatrixXd::Identity(free.size(), free.size());
  for (int j = 0; j < spec.n_species(); ++j) {
    const int o = layout.theta_offset(j);
    const int n = layout.theta_size(j);
    for (int q = 0; q < n; ++q) {
      J(o + q, o) = 1.0;
      for (int p = 1; p <= q; ++p) J(o + q, o + p) = std::exp(free(o + p));
      for (int p = q + 1; p < n; ++p) J(o + q, o + p) = 0.0;
    }
  }
  return J;
}

}  // namespace reparam

}  // namespace mctm
