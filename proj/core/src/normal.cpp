#include "mctm/normal.hpp"

#include <boost/math/special_functions/erf.hpp>

#include "mctm/errors.hpp"
#include "mctm/rng.hpp"

namespace mctm::normal {

double quantile(double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw InputError("normal quantile needs p in [0, 1]");
  if (p == 0.0) return -std::numeric_limits<double>::infinity();
  if (p == 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

double upper_quantile(double q) { return -quantile(q); }

}  // namespace mctm::normal

namespace mctm {

double RandomStream::normal() { return ::mctm::normal::quantile(uniform()); }

}  // namespace mctm
