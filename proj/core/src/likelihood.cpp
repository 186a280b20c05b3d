#include "mctm/likelihood.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <string>

#include <Eigen/Dense>

#include "mctm/errors.hpp"
#include "mctm/normal.hpp"
#include "mctm/parallel.hpp"

namespace mctm {

std::string to_string(LikelihoodKind kind) {
  switch (kind) {
    case LikelihoodKind::ContinuousApprox: return "continuous";
    case LikelihoodKind::DiscreteApprox: return "discrete";
    case LikelihoodKind::ExactOracle: return "exact";
  }
  return "unknown";
}

LikelihoodKind likelihood_kind_from_string(const std::string& s) {
  if (s == "continuous") return LikelihoodKind::ContinuousApprox;
  if (s == "discrete") return LikelihoodKind::DiscreteApprox;
  if (s == "exact") return LikelihoodKind::ExactOracle;
  throw InputError("unknown likelihood kind '" + s + "' (expected continuous or discrete)");
}

double midpoint_transform(int y) {
  if (y < 0) throw InputError("midpoint transform needs non-negative counts, got " + std::to_string(y));
  return y == 0 ? 0.0 : y - 0.5;
}

Eigen::VectorXd midpoint_transform(const Eigen::VectorXi& y) {
  Eigen::VectorXd out(y.size());
  for (Eigen::Index i = 0; i < y.size(); ++i) out(i) = midpoint_transform(y(i));
  return out;
}

// ---------------------------------------------------------------------------
// PreparedData

PreparedData::PreparedData(const ModelSpec& spec, const ObservationTable& table)
    : n_(table.size()), n_species_(spec.n_species()) {
  spec.validate();
  if (table.species() != spec.species) {
    throw InputError("observation table species do not match the model species (same order required)");
  }
  const int J = n_species_;
  const auto N = static_cast<Eigen::Index>(n_);
  counts_.resize(N, J);
  shift_.resize(N, spec.shift_width());
  const bool covariate = spec.lambda_mode == LambdaMode::CovariateDependent;
  lambda_design_.resize(N, covariate ? spec.design.harmonic_width() : 0);
  days_.resize(n_);

  for (Eigen::Index i = 0; i < N; ++i) {
    const auto& row = table.rows()[i];
    shift_.row(i) = spec.design.shift_row(row.year, row.day).transpose();
    if (covariate) lambda_design_.row(i) = spec.design.harmonic_row(row.day).transpose();
    days_[i] = row.day;
    for (int j = 0; j < J; ++j) {
      const int cap = static_cast<int>(std::floor(spec.support_hi[j]));
      int y = row.counts[j];
      if (y > cap) {
        y = cap;
        ++clamped_;
      }
      counts_(i, j) = y;
    }
  }

  for (int j = 0; j < J; ++j) {
    const BernsteinBasis basis = spec.basis(j);
    const int P = basis.size();
    Eigen::MatrixXd up(N, P), lo(N, P), mid(N, P), der(N, P);
    std::map<int, Eigen::VectorXd> cache_at, cache_mid, cache_der;
    auto at = [&](int y) -> const Eigen::VectorXd& {
      auto it = cache_at.find(y);
      if (it == cache_at.end()) it = cache_at.emplace(y, basis.eval(y)).first;
      return it->second;
    };
    for (Eigen::Index i = 0; i < N; ++i) {
      const int y = counts_(i, j);
      up.row(i) = at(y).transpose();
      if (y > 0) lo.row(i) = at(y - 1).transpose(); else lo.row(i).setZero();
      auto m = cache_mid.find(y);
      if (m == cache_mid.end()) {
        const double yt = midpoint_transform(y);
        m = cache_mid.emplace(y, basis.eval(yt)).first;
        cache_der.emplace(y, basis.deriv(yt));
      }
      mid.row(i) = m->second.transpose();
      der.row(i) = cache_der.at(y).transpose();
    }
    upper_.push_back(std::move(up));
    lower_.push_back(std::move(lo));
    mid_.push_back(std::move(mid));
    mid_deriv_.push_back(std::move(der));
  }
}

// ---------------------------------------------------------------------------
// block evaluation

namespace {

struct BlockResult {
  double value = 0.0;
  Eigen::VectorXd gradient;
  std::size_t floored = 0;
};

class BlockEvaluator {
 public:
  BlockEvaluator(const JointModel& model, const PreparedData& data)
      : model_(model), data_(data), layout_(model.spec()), J_(model.n_species()) {
    if (data.n_species() != J_) throw InputError("data and model have different species counts");
    if (model.spec().link != Link::Normal) {
      throw UnsupportedLinkError("only the standard normal inverse link is implemented");
    }
  }

  BlockResult run(LikelihoodKind kind, Eigen::Index start, Eigen::Index rows, bool with_gradient,
                  double* terms) const {
    setup(start, rows);
    return kind == LikelihoodKind::DiscreteApprox
               ? discrete(start, rows, with_gradient, terms)
               : continuous(start, rows, with_gradient, terms);
  }

 private:
  // Shifted midpoint transforms and lambda entries for rows [start, start+rows).
  void setup(Eigen::Index start, Eigen::Index rows) const {
    hm_.assign(J_, Eigen::ArrayXd());
    eta_.assign(J_, Eigen::ArrayXd());
    for (int j = 0; j < J_; ++j) {
      const auto& m = model_.marginal(j);
      eta_[j] = (data_.shift_design().middleRows(start, rows) * m.beta).array();
      hm_[j] = (data_.mid_basis(j).middleRows(start, rows) * m.theta).array() - eta_[j];
    }
    const int pairs = model_.spec().n_pairs();
    lam_.assign(pairs, Eigen::ArrayXd());
    for (int p = 0; p < pairs; ++p) {
      lam_[p] = Eigen::ArrayXd::Constant(rows, model_.lambda().tau(p));
      if (data_.lambda_design().cols() > 0) {
        lam_[p] += (data_.lambda_design().middleRows(start, rows) *
                    model_.lambda().zeta.row(p).transpose()).array();
      }
    }
  }

  Eigen::ArrayXd conditioning(int j, Eigen::Index rows) const {
    Eigen::ArrayXd c = Eigen::ArrayXd::Zero(rows);
    for (int k = 0; k < j; ++k) c += lam_[pair_index(j, k)] * hm_[k];
    return c;
  }

  // Pair gradients: d/dtau = sum(w), d/dzeta = H' w.
  void add_pair_gradient(Eigen::VectorXd& g, int j, int k, const Eigen::ArrayXd& w,
                         Eigen::Index start, Eigen::Index rows) const {
    const int o = layout_.lambda_offset(pair_index(j, k));
    g(o) += w.sum();
    if (data_.lambda_design().cols() > 0) {
      g.segment(o + 1, data_.lambda_design().cols()) +=
          data_.lambda_design().middleRows(start, rows).transpose() * w.matrix();
    }
  }

  BlockResult discrete(Eigen::Index start, Eigen::Index rows, bool with_gradient, double* terms) const {
    BlockResult out;
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<Eigen::ArrayXd> gu(J_), gl(J_), r(J_);
    Eigen::ArrayXd row_terms = Eigen::ArrayXd::Zero(rows);
    for (int j = 0; j < J_; ++j) {
      const auto& theta = model_.marginal(j).theta;
      const Eigen::ArrayXd c = conditioning(j, rows);
      const Eigen::ArrayXd upper =
          (data_.upper_basis(j).middleRows(start, rows) * theta).array() - eta_[j] + c;
      const Eigen::ArrayXd lower =
          (data_.lower_basis(j).middleRows(start, rows) * theta).array() - eta_[j] + c;
      gu[j].resize(rows);
      gl[j].resize(rows);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const bool open = data_.counts()(start + i, j) == 0;
        const double lo = open ? -inf : lower(i);
        const double up = upper(i);
        if (!(up > lo)) {
          throw EvaluationError("zero-probability cell at observation " + std::to_string(start + i) +
                                    ", species " + std::to_string(j) + " (upper limit equals lower limit)",
                                start + i, j);
        }
        double d = normal::interval(lo, up);
        if (!(d >= kCellFloor)) {
          d = kCellFloor;
          ++out.floored;
          gu[j](i) = 0.0;
          gl[j](i) = 0.0;
        } else {
          gu[j](i) = normal::pdf(up) / d;
          gl[j](i) = normal::pdf(lo) / d;
        }
        row_terms(i) += std::log(d);
      }
      r[j] = gu[j] - gl[j];
    }
    out.value = row_terms.sum();
    if (terms) Eigen::Map<Eigen::ArrayXd>(terms, rows) = row_terms;
    if (!with_gradient) return out;

    out.gradient = Eigen::VectorXd::Zero(layout_.size());
    const auto X = data_.shift_design().middleRows(start, rows);
    for (int k = 0; k < J_; ++k) {
      Eigen::ArrayXd w = Eigen::ArrayXd::Zero(rows);
      for (int j = k + 1; j < J_; ++j) w += r[j] * lam_[pair_index(j, k)];
      out.gradient.segment(layout_.theta_offset(k), layout_.theta_size(k)) =
          data_.upper_basis(k).middleRows(start, rows).transpose() * gu[k].matrix() -
          data_.lower_basis(k).middleRows(start, rows).transpose() * gl[k].matrix() +
          data_.mid_basis(k).middleRows(start, rows).transpose() * w.matrix();
      out.gradient.segment(layout_.beta_offset(k), layout_.beta_size()) =
          -(X.transpose() * (r[k] + w).matrix());
      for (int j = k + 1; j < J_; ++j) {
        add_pair_gradient(out.gradient, j, k, r[j] * hm_[k], start, rows);
      }
    }
    return out;
  }

  BlockResult continuous(Eigen::Index start, Eigen::Index rows, bool with_gradient, double* terms) const {
    BlockResult out;
    std::vector<Eigen::ArrayXd> z(J_), slope(J_);
    Eigen::ArrayXd row_terms = Eigen::ArrayXd::Zero(rows);
    for (int j = 0; j < J_; ++j) {
      const auto& theta = model_.marginal(j).theta;
      slope[j] = (data_.mid_deriv(j).middleRows(start, rows) * theta).array();
      for (Eigen::Index i = 0; i < rows; ++i) {
        if (!(slope[j](i) > 0.0)) {
          throw EvaluationError("transformation derivative is not positive at observation " +
                                    std::to_string(start + i) + ", species " + std::to_string(j),
                                start + i, j);
        }
      }
      z[j] = hm_[j] + conditioning(j, rows);
      row_terms += -0.5 * z[j].square() - 0.91893853320467274178 + slope[j].log();
    }
    out.value = row_terms.sum();
    if (terms) Eigen::Map<Eigen::ArrayXd>(terms, rows) = row_terms;
    if (!with_gradient) return out;

    out.gradient = Eigen::VectorXd::Zero(layout_.size());
    const auto X = data_.shift_design().middleRows(start, rows);
    for (int k = 0; k < J_; ++k) {
      Eigen::ArrayXd v = z[k];
      for (int j = k + 1; j < J_; ++j) v += z[j] * lam_[pair_index(j, k)];
      out.gradient.segment(layout_.theta_offset(k), layout_.theta_size(k)) =
          -(data_.mid_basis(k).middleRows(start, rows).transpose() * v.matrix()) +
          data_.mid_deriv(k).middleRows(start, rows).transpose() * slope[k].inverse().matrix();
      out.gradient.segment(layout_.beta_offset(k), layout_.beta_size()) = X.transpose() * v.matrix();
      for (int j = k + 1; j < J_; ++j) {
        add_pair_gradient(out.gradient, j, k, -(z[j] * hm_[k]), start, rows);
      }
    }
    return out;
  }

  const JointModel& model_;
  const PreparedData& data_;
  ParameterLayout layout_;
  int J_;
  mutable std::vector<Eigen::ArrayXd> hm_, eta_, lam_;
};

void check_compatible(const JointModel& model, const PreparedData& data) {
  // The prepared basis rows belong to one model structure; a model with
  // other orders or another design would be read out of bounds.
  if (data.n_species() != model.n_species()) throw InputError("data and model have different species counts");
  for (int j = 0; j < model.n_species(); ++j) {
    if (data.upper_basis(j).cols() != model.marginal(j).theta.size()) {
      throw ParameterError("Bernstein order mismatch for species " + std::to_string(j));
    }
  }
  const bool covariate = model.spec().lambda_mode == LambdaMode::CovariateDependent;
  if (data.shift_design().cols() != model.spec().shift_width() ||
      data.lambda_design().cols() != (covariate ? model.spec().design.harmonic_width() : 0)) {
    throw ParameterError("prepared data were built for a different design");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

LikelihoodResult loglik(const JointModel& model, const PreparedData& data, LikelihoodKind kind,
                        const LikelihoodOptions& options) {
  check_compatible(model, data);
  if (kind == LikelihoodKind::ExactOracle) {
    if (options.with_gradient) {
      throw InputError("the exact likelihood is evaluation-only; no gradient is available");
    }
    return {loglik_exact(model, data), {}, 0};
  }
  const auto N = static_cast<Eigen::Index>(data.size());
  const auto block = static_cast<Eigen::Index>(std::max<std::size_t>(1, options.block_size));
  const std::size_t n_blocks = static_cast<std::size_t>((N + block - 1) / block);
  std::vector<BlockResult> parts(n_blocks);
  parallel_for(
      n_blocks,
      [&](std::size_t b) {
        BlockEvaluator eval(model, data);  // one per task: holds per-block scratch
        const Eigen::Index start = static_cast<Eigen::Index>(b) * block;
        parts[b] = eval.run(kind, start, std::min(block, N - start), options.with_gradient, nullptr);
      },
      options.threads);

  LikelihoodResult out;
  if (options.with_gradient) out.gradient = Eigen::VectorXd::Zero(ParameterLayout(model.spec()).size());
  for (const auto& p : parts) {
    out.value += p.value;
    out.floored_cells += p.floored;
    if (options.with_gradient) out.gradient += p.gradient;
  }
  return out;
}

Eigen::VectorXd loglik_terms(const JointModel& model, const PreparedData& data, LikelihoodKind kind,
                             const IntegratorConfig& integrator) {
  check_compatible(model, data);
  const auto N = static_cast<Eigen::Index>(data.size());
  Eigen::VectorXd terms(N);
  if (kind == LikelihoodKind::ExactOracle) {
    const int J = model.n_species();
    if (J > 3) throw InputError("the exact likelihood oracle is limited to J <= 3 species");
    if (model.spec().link != Link::Normal) {
      throw UnsupportedLinkError("only the standard normal inverse link is implemented");
    }
    constexpr double inf = std::numeric_limits<double>::infinity();
    const bool covariate = model.spec().lambda_mode == LambdaMode::CovariateDependent;
    Eigen::MatrixXd chol = model.lambda_matrix(covariate ? std::optional<double>(1.0) : std::nullopt)
                               .triangularView<Eigen::UnitLower>()
                               .solve(Eigen::MatrixXd::Identity(J, J));
    parallel_for(static_cast<std::size_t>(N), [&](std::size_t ii) {
      const auto i = static_cast<Eigen::Index>(ii);
      Eigen::MatrixXd c = chol;
      if (covariate) {
        c = model.lambda_matrix(data.days()[ii])
                .triangularView<Eigen::UnitLower>()
                .solve(Eigen::MatrixXd::Identity(J, J));
      }
      Eigen::VectorXd lo(J), up(J);
      for (int j = 0; j < J; ++j) {
        const auto& m = model.marginal(j);
        const double eta = data.shift_design().row(i).dot(m.beta);
        up(j) = data.upper_basis(j).row(i).dot(m.theta) - eta;
        lo(j) = data.counts()(i, j) == 0 ? -inf : data.lower_basis(j).row(i).dot(m.theta) - eta;
      }
      try {
        const auto r = mvn_rectangle(c, lo, up, integrator);
        terms(i) = std::log(std::max(r.probability, kCellFloor));
      } catch (const EvaluationError& e) {
        throw EvaluationError(std::string(e.what()) + " at observation " + std::to_string(i), i);
      }
    });
    return terms;
  }
  const Eigen::Index block = 512;
  const std::size_t n_blocks = static_cast<std::size_t>((N + block - 1) / block);
  parallel_for(n_blocks, [&](std::size_t b) {
    BlockEvaluator eval(model, data);
    const Eigen::Index start = static_cast<Eigen::Index>(b) * block;
    eval.run(kind, start, std::min(block, N - start), false, terms.data() + start);
  });
  return terms;
}

double loglik_continuous(const JointModel& model, const PreparedData& data) {
  return loglik(model, data, LikelihoodKind::ContinuousApprox, {.with_gradient = false}).value;
}

Eigen::VectorXd grad_continuous(const JointModel& model, const PreparedData& data) {
  return loglik(model, data, LikelihoodKind::ContinuousApprox).gradient;
}

double loglik_discrete(const JointModel& model, const PreparedData& data) {
  return loglik(model, data, LikelihoodKind::DiscreteApprox, {.with_gradient = false}).value;
}

Eigen::VectorXd grad_discrete(const JointModel& model, const PreparedData& data) {
  return loglik(model, data, LikelihoodKind::DiscreteApprox).gradient;
}

double loglik_exact(const JointModel& model, const PreparedData& data, const IntegratorConfig& integrator) {
  const Eigen::VectorXd terms = loglik_terms(model, data, LikelihoodKind::ExactOracle, integrator);
  // Fixed-order block reduction, same as the approximations.
  double total = 0.0;
  const Eigen::Index block = 512;
  for (Eigen::Index s = 0; s < terms.size(); s += block) {
    total += terms.segment(s, std::min(block, terms.size() - s)).sum();
  }
  return total;
}

}  // namespace mctm
