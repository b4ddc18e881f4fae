#pragma once

#include <cstddef>
#include <vector>

#include "agentfield/core.hpp"
#include "agentfield/geometry.hpp"

namespace agentfield {

enum class Q0Kind { Uniform, TruncatedGaussian };

/// User-facing kernel parameters.
///
/// Q(x, .)  = eps_q * Uniform(E) + (1 - eps_q) * N(x, q_sigma^2 I) truncated to E
/// Q0(x, .) = Uniform(E), or N(x, q0_sigma^2 I) truncated to E
/// P(x, .)  = N(x, p_sigma^2 I) on R^d
/// P'(x, .) = N(x, pprime_sigma^2 I) on R^d
struct KernelParams {
  double q_sigma = 0.1;
  double eps_q = 0.7;
  Q0Kind q0_kind = Q0Kind::Uniform;
  double q0_sigma = 0.1;
  double p_sigma = 0.2;
  double pprime_sigma = 0.2;
};

/// Regularity constants of the kernels, in closed form for the Gaussian
/// families above. Bounds that have no closed form (l_q_q0) are valid upper
/// bounds rather than suprema.
struct DerivedConstants {
  double m_p = 0.0;          // sup P(x, y)
  double m_pprime = 0.0;     // sup P'(x, y)
  double m_p_pprime = 0.0;   // max of the two
  double mbar_p = 0.0;       // sup_y int P(x, y) dx
  double mbar_p_pprime = 0.0;
  double l_p = 0.0;          // Lipschitz constant of x -> P(x, y)
  double l_pprime = 0.0;
  double lbar_p_pprime = 0.0;  // Lipschitz constant in y, both kernels
  double m_q = 0.0;
  double m_q0 = 0.0;
  double m_q_q0 = 0.0;       // sup of the Q, Q0 densities on E x E
  double l_q = 0.0;
  double l_q0 = 0.0;
  double l_q_q0 = 0.0;       // |Q(x,A) - Q(x',A)| <= l |x - x'| Uniform(E)(A)
  double alpha_pprime = 0.0;   // inf_{x in E} P'(x, E)
  double delta_pprime = 0.0;   // vol(E) * inf_{x,y in E} P'(x, y)
  double beta_pprime = 0.0;    // 1 - alpha * delta
};

struct KernelBank {
  KernelParams params;
  DerivedConstants derived;
};

void validate(const KernelParams& params);

/// Fills every derived constant. Throws ConfigError on invalid parameters.
KernelBank derive_constants(const KernelParams& params, const BoxDomain& dom);

enum class FieldKernel { P, Pprime };

[[nodiscard]] double field_sigma(const KernelBank& bank, FieldKernel which);

// --- densities (w.r.t. Lebesgue on E for Q, Q0 and on R^d for P, P') ---

double q_density(const Point& x, const Point& y, const KernelBank& bank, const BoxDomain& dom);
double q0_density(const Point& x, const Point& y, const KernelBank& bank, const BoxDomain& dom);
double p_density(const Point& x, const Point& y, FieldKernel which, const KernelBank& bank,
                 const BoxDomain& dom);

/// Q(x, A) for an axis-aligned box A (clipped to E), computed exactly.
double q_box_probability(const Point& x, const Point& box_lo, const Point& box_hi,
                         const KernelBank& bank, const BoxDomain& dom);
double q0_box_probability(const Point& x, const Point& box_lo, const Point& box_hi,
                          const KernelBank& bank, const BoxDomain& dom);

// --- sampling ---

/// Attempts of box rejection before falling back to per-coordinate inverse CDF.
inline constexpr int kRejectionCap = 64;

/// Draw from N(x, sigma^2 I) truncated to E.
Point sample_truncated_gaussian(const Point& x, double sigma, const BoxDomain& dom, Rng& rng);
Point sample_uniform(const BoxDomain& dom, Rng& rng);

Point q_sample(const Point& x, const KernelBank& bank, const BoxDomain& dom, Rng& rng);
Point q0_sample(const Point& x, const KernelBank& bank, const BoxDomain& dom, Rng& rng);

/// Probability that N(center, sigma^2) on one axis lands in [lo, hi] given it
/// lands in [a, b] (the axis extent of E).
double truncated_axis_probability(double center, double sigma, double a, double b, double lo, double hi);

/// Per-axis table T[i * n + j] = P(truncated Gaussian from the centre of
/// cell i lands in cell j) for the cells of `grid` along `axis`. Rows sum to 1.
std::vector<double> truncated_cell_table(const GridSpec& grid, std::size_t axis, double sigma);

}  // namespace agentfield
