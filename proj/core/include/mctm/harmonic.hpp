#pragma once

#include <vector>

#include <Eigen/Core>

namespace mctm {

inline constexpr int kDaysPerYear = 365;

/// Seasonal shift design: intercept, year indicators against the first
/// (baseline) year, and S sine/cosine pairs over a 365-day year.
///
/// Harmonic columns are ordered sin(1), cos(1), sin(2), cos(2), ...
class HarmonicDesign {
 public:
  HarmonicDesign(int n_harmonics, std::vector<int> years);

  int harmonics() const noexcept { return n_harmonics_; }
  const std::vector<int>& years() const noexcept { return years_; }

  int harmonic_width() const noexcept { return 2 * n_harmonics_; }
  int year_width() const noexcept { return static_cast<int>(years_.size()) - 1; }

  /// Full row x(year, day) = (1, year indicators, harmonics).
  int row_width() const noexcept { return 1 + year_width() + harmonic_width(); }
  Eigen::VectorXd row(int year, double day) const;

  /// Row without the intercept column. The marginal transformation already
  /// carries a free level, so the model uses this one for eta_j.
  int shift_width() const noexcept { return year_width() + harmonic_width(); }
  Eigen::VectorXd shift_row(int year, double day) const;

  /// Harmonic block only; used for the covariate-dependent lambda entries.
  Eigen::VectorXd harmonic_row(double day) const;

  int year_index(int year) const;  // throws InputError for unknown years

  bool operator==(const HarmonicDesign&) const = default;

 private:
  int n_harmonics_;
  std::vector<int> years_;
};

}  // namespace mctm
