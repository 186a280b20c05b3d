#include "mctm/harmonic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mctm/errors.hpp"

namespace mctm {

HarmonicDesign::HarmonicDesign(int n_harmonics, std::vector<int> years)
    : n_harmonics_(n_harmonics), years_(std::move(years)) {
  if (n_harmonics_ < 0) throw InputError("number of harmonics must be non-negative");
  if (years_.empty()) throw InputError("harmonic design needs at least one year");
  if (!std::is_sorted(years_.begin(), years_.end()) ||
      std::adjacent_find(years_.begin(), years_.end()) != years_.end()) {
    throw InputError("design years must be strictly increasing");
  }
}

int HarmonicDesign::year_index(int year) const {
  const auto it = std::lower_bound(years_.begin(), years_.end(), year);
  if (it == years_.end() || *it != year) {
    throw InputError("year " + std::to_string(year) + " is not part of the design");
  }
  return static_cast<int>(it - years_.begin());
}

Eigen::VectorXd HarmonicDesign::harmonic_row(double day) const {
  if (!std::isfinite(day)) throw InputError("day must be finite");
  Eigen::VectorXd h(harmonic_width());
  const double base = 2.0 * std::numbers::pi * day / kDaysPerYear;
  for (int k = 1; k <= n_harmonics_; ++k) {
    h(2 * (k - 1)) = std::sin(k * base);
    h(2 * (k - 1) + 1) = std::cos(k * base);
  }
  return h;
}

Eigen::VectorXd HarmonicDesign::shift_row(int year, double day) const {
  if (!(day >= 1.0 && day <= kDaysPerYear)) {
    throw InputError("day of year must lie in 1..365, got " + std::to_string(day));
  }
  const int yi = year_index(year);
  Eigen::VectorXd x = Eigen::VectorXd::Zero(shift_width());
  if (yi > 0) x(yi - 1) = 1.0;
  x.tail(harmonic_width()) = harmonic_row(day);
  return x;
}

Eigen::VectorXd HarmonicDesign::row(int year, double day) const {
  Eigen::VectorXd x(row_width());
  x(0) = 1.0;
  x.tail(shift_width()) = shift_row(year, day);
  return x;
}

}  // namespace mctm
