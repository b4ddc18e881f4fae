#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

namespace agentfield::normal {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }

inline double cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

/// P(a < Z < b) for a standard normal Z, computed on the side of the
/// distribution that avoids cancellation.
inline double interval(double a, double b) {
  if (a >= 0.0) return 0.5 * (std::erfc(a / std::numbers::sqrt2) - std::erfc(b / std::numbers::sqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / std::numbers::sqrt2) - std::erfc(-a / std::numbers::sqrt2));
  return 1.0 - 0.5 * std::erfc(-a / std::numbers::sqrt2) - 0.5 * std::erfc(b / std::numbers::sqrt2);
}

double quantile(double p);

/// Peak value of the isotropic Gaussian density in `dim` dimensions.
inline double iso_peak(std::size_t dim, double sigma) {
  return std::pow(2.0 * std::numbers::pi * sigma * sigma, -0.5 * static_cast<double>(dim));
}

inline double iso_pdf(std::size_t dim, double squared_radius, double sigma) {
  return iso_peak(dim, sigma) * std::exp(-0.5 * squared_radius / (sigma * sigma));
}

}  // namespace agentfield::normal
