#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mctm/bernstein.hpp"
#include "mctm/harmonic.hpp"
#include "mctm/observations.hpp"

namespace mctm {

/// Inverse link F. Only the standard normal is implemented; the others are
/// accepted by the API and rejected at evaluation time.
enum class Link { Normal, Logistic, MinExtremeValue, MaxExtremeValue };

enum class LambdaMode { Constant, CovariateDependent };

std::string to_string(Link link);
std::string to_string(LambdaMode mode);
Link link_from_string(const std::string& s);
LambdaMode lambda_mode_from_string(const std::string& s);

/// Lower-triangular pair (row, col), row > col, 0-based. Pairs are ordered
/// row by row: (1,0), (2,0), (2,1), (3,0), ...
struct SpeciesPair {
  int row = 1;
  int col = 0;
};

inline int pair_count(int n_species) { return n_species * (n_species - 1) / 2; }
inline int pair_index(int row, int col) { return row * (row - 1) / 2 + col; }
SpeciesPair pair_at(int index);

/// Structure of a joint model: everything except parameter values.
struct ModelSpec {
  std::vector<std::string> species;
  std::vector<int> bernstein_coefs;   // P per species
  std::vector<double> support_hi;     // Bernstein support is [0, support_hi[j]]
  HarmonicDesign design{3, {2002}};
  LambdaMode lambda_mode = LambdaMode::Constant;
  Link link = Link::Normal;

  int n_species() const { return static_cast<int>(species.size()); }
  int n_pairs() const { return pair_count(n_species()); }
  /// Parameters per lambda pair: tau, plus the 2S harmonic zeta block.
  int lambda_width() const {
    return lambda_mode == LambdaMode::Constant ? 1 : 1 + design.harmonic_width();
  }
  int shift_width() const { return design.shift_width(); }

  BernsteinBasis basis(int species) const;
  int species_index(const std::string& name) const;
  void validate() const;

  /// Spec with species reordered (new species a is old species order[a]).
  ModelSpec permuted(const std::vector<int>& order) const;
  ModelSpec with_lambda_mode(LambdaMode mode) const;
};

/// Build a spec from data: support [0, max observed count] per species,
/// years from the table. Throws InputError when a species is constant.
ModelSpec make_spec(const ObservationTable& table, int bernstein_coefs = 7, int harmonics = 3,
                    LambdaMode mode = LambdaMode::Constant);

/// Offsets of the packed parameter vector
///   theta = (vartheta_1, beta_1, ..., vartheta_J, beta_J, pair_1, ..., pair_K)
/// with pair_k = (tau_k, zeta_k[0..2S)) in pair order.
class ParameterLayout {
 public:
  explicit ParameterLayout(const ModelSpec& spec);

  int size() const noexcept { return size_; }
  int theta_offset(int j) const { return theta_offset_.at(j); }
  int theta_size(int j) const { return theta_size_.at(j); }
  int beta_offset(int j) const { return beta_offset_.at(j); }
  int beta_size() const noexcept { return beta_size_; }
  int lambda_offset(int pair) const { return lambda_offset_ + pair * lambda_width_; }
  int lambda_begin() const noexcept { return lambda_offset_; }
  int lambda_width() const noexcept { return lambda_width_; }
  int n_pairs() const noexcept { return n_pairs_; }

  std::vector<std::string> names(const ModelSpec& spec) const;

 private:
  std::vector<int> theta_offset_;
  std::vector<int> theta_size_;
  std::vector<int> beta_offset_;
  int beta_size_ = 0;
  int lambda_offset_ = 0;
  int lambda_width_ = 1;
  int n_pairs_ = 0;
  int size_ = 0;
};

struct MarginalParams {
  Eigen::VectorXd theta;  // Bernstein coefficients, non-decreasing
  Eigen::VectorXd beta;   // shift coefficients
};

struct LambdaParams {
  Eigen::VectorXd tau;    // one per pair
  Eigen::MatrixXd zeta;   // pairs x 2S; zero columns in constant mode
};

/// Joint count transformation model with Gaussian-copula dependence.
///
/// Marginal j: P(Y_j <= y | x) = Phi(alpha_j(floor(y)) - eta_j(x)), with
/// alpha_j in Bernstein form and eta_j = shift_row(x)' beta_j. Dependence is
/// carried by the unit lower-triangular Lambda(x); the latent vector
/// has covariance Lambda^-1 Lambda^-T.
class JointModel {
 public:
  JointModel(ModelSpec spec, std::vector<MarginalParams> marginals, LambdaParams lambda);

  static JointModel from_packed(const ModelSpec& spec, const Eigen::VectorXd& packed);
  Eigen::VectorXd pack() const;

  const ModelSpec& spec() const noexcept { return spec_; }
  int n_species() const noexcept { return spec_.n_species(); }
  const MarginalParams& marginal(int j) const { return marginals_.at(j); }
  const LambdaParams& lambda() const noexcept { return lambda_; }
  const BernsteinBasis& basis(int j) const { return bases_.at(j); }

  /// alpha_j at a real argument (no flooring; clamped to the support).
  double transform(int j, double y) const;
  /// alpha_j(floor(y)); -inf for y < 0.
  double transform_cutoff(int j, double y) const;
  double shift(int j, const Covariates& x) const;

  double marginal_cdf(int j, double y, const Covariates& x) const;
  double marginal_pmf(int j, double y, const Covariates& x) const;
  /// Probability above the support maximum (not represented on the grid).
  double tail_mass(int j, const Covariates& x) const;
  /// P(Y <= Y_ref | x, x_ref) under the normal link.
  double marginal_auc(int j, const Covariates& x, const Covariates& x_ref) const;
  /// Smallest count y on the grid with cdf(y) >= p (support max if none).
  int marginal_quantile(int j, double p, const Covariates& x) const;

  double lambda_entry(int pair, std::optional<double> day) const;
  /// Lambda(x): unit diagonal, entry (row, col) = tau + zeta' harmonics(day).
  /// day is required iff the model is covariate dependent.
  Eigen::MatrixXd lambda_matrix(std::optional<double> day = std::nullopt) const;

  int species_index(const std::string& name) const { return spec_.species_index(name); }

 private:
  void require_normal_link() const;

  ModelSpec spec_;
  std::vector<MarginalParams> marginals_;
  LambdaParams lambda_;
  std::vector<BernsteinBasis> bases_;
};

/// Lambda matrix from packed pair values (row-major pair order).
Eigen::MatrixXd lambda_from_pairs(int n_species, const Eigen::VectorXd& pair_values);

/// Smooth reparameterization used by the optimizer: vartheta_1 free and
/// vartheta_p = vartheta_{p-1} + exp(gamma_p). Other parameters unchanged.
namespace reparam {

Eigen::VectorXd to_unconstrained(const ModelSpec& spec, const Eigen::VectorXd& packed);
Eigen::VectorXd from_unconstrained(const ModelSpec& spec, const Eigen::VectorXd& free);
/// Gradient with respect to the free parameters given the packed gradient.
Eigen::VectorXd pullback_gradient(const ModelSpec& spec, const Eigen::VectorXd& free,
                                  const Eigen::VectorXd& packed_gradient);
/// d packed / d free.
Eigen::MatrixXd jacobian(const ModelSpec& spec, const Eigen::VectorXd& free);

}  // namespace reparam

}  // namespace mctm
