#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "agentfield/core.hpp"
#include "agentfield/geometry.hpp"
#include "agentfield/kernels.hpp"
#include "agentfield/meanfield.hpp"
#include "agentfield/measures.hpp"
#include "agentfield/normal.hpp"

namespace agentfield::testing {

inline BoxDomain unit_interval(double margin = 2.0) {
  return BoxDomain::make(1, Point{0.0, 0.0, 0.0}, Point{1.0, 1.0, 1.0}, margin);
}

inline BoxDomain unit_square(double margin = 2.0) {
  return BoxDomain::make(2, Point{0.0, 0.0, 0.0}, Point{1.0, 1.0, 1.0}, margin);
}

inline Model default_model(std::size_t cells = 256, double eps = 0.3, double lambda = 0.02) {
  return Model(unit_interval(), KernelParams{}, cells, eps, lambda);
}

inline Point at(double x) { return Point{x, 0.0, 0.0}; }

/// Cell probabilities of a histogram of 1-d samples on `cells` equal cells of [lo, hi).
inline std::vector<double> histogram(const std::vector<Point>& xs, double lo, double hi, std::size_t cells) {
  std::vector<double> h(cells, 0.0);
  for (const Point& p : xs) {
    const double u = (p[0] - lo) / (hi - lo) * static_cast<double>(cells);
    if (u < 0.0 || u >= static_cast<double>(cells)) continue;
    h[static_cast<std::size_t>(u)] += 1.0;
  }
  for (double& v : h) v /= static_cast<double>(xs.size());
  return h;
}

/// Largest |observed - expected| in units of the binomial standard error.
inline double max_z(const std::vector<double>& observed, const std::vector<double>& expected, std::size_t n) {
  double worst = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double p = expected[i];
    const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / static_cast<double>(n));
    worst = std::max(worst, std::abs(observed[i] - p) / se);
  }
  return worst;
}

/// Per-cell z limit that keeps the family-wise false alarm rate of a whole
/// histogram at `alpha` (two-sided Bonferroni).
inline double cell_z_limit(std::size_t cells, double alpha = 1e-3) {
  return normal::quantile(1.0 - alpha / (2.0 * static_cast<double>(cells)));
}

}  // namespace agentfield::testing
