#include "agentfield/normal.hpp"

#include <limits>

#include <boost/math/special_functions/erf.hpp>

namespace agentfield::normal {

double quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

}  // namespace agentfield::normal
