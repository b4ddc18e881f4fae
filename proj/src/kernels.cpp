#include "agentfield/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "agentfield/normal.hpp"

namespace agentfield {

namespace {

// Mass of N(x, sigma^2) on [a, b] along one axis.
double axis_mass(double x, double sigma, double a, double b) {
  return normal::interval((a - x) / sigma, (b - x) / sigma);
}

double truncated_density(const Point& x, const Point& y, double sigma, const BoxDomain& dom) {
  double dens = 1.0;
  for (std::size_t a = 0; a < dom.dim; ++a) {
    const double z = (y[a] - x[a]) / sigma;
    dens *= normal::pdf(z) / sigma / axis_mass(x[a], sigma, dom.lower[a], dom.upper[a]);
  }
  return dens;
}

double truncated_box_probability(const Point& x, double sigma, const Point& lo, const Point& hi,
                                 const BoxDomain& dom) {
  double p = 1.0;
  for (std::size_t a = 0; a < dom.dim; ++a) {
    const double l = std::max(lo[a], dom.lower[a]);
    const double h = std::min(hi[a], dom.upper[a]);
    if (!(h > l)) return 0.0;
    p *= truncated_axis_probability(x[a], sigma, dom.lower[a], dom.upper[a], l, h);
  }
  return p;
}

double uniform_box_probability(const Point& lo, const Point& hi, const BoxDomain& dom) {
  double p = 1.0;
  for (std::size_t a = 0; a < dom.dim; ++a) {
    const double l = std::max(lo[a], dom.lower[a]);
    const double h = std::min(hi[a], dom.upper[a]);
    if (!(h > l)) return 0.0;
    p *= (h - l) / dom.width(a);
  }
  return p;
}

// Smallest mass a truncation normaliser can take (x at a corner of E), over
// all axes jointly and per axis.
struct TruncationFloor {
  double joint = 1.0;
  double axis = 1.0;
};

TruncationFloor truncation_floor(double sigma, const BoxDomain& dom) {
  TruncationFloor f;
  for (std::size_t a = 0; a < dom.dim; ++a) {
    const double z = normal::interval(0.0, dom.width(a) / sigma);
    f.joint *= z;
    f.axis = std::min(f.axis, z);
  }
  return f;
}

// Upper bound on sup_{x,y} |grad_x q(x, y)| for the truncated Gaussian density.
double truncated_gradient_bound(double sigma, const BoxDomain& dom) {
  const TruncationFloor f = truncation_floor(sigma, dom);
  const double peak = normal::iso_peak(dom.dim, sigma);
  const double d = static_cast<double>(dom.dim);
  return peak / (sigma * f.joint) *
         (std::exp(-0.5) + std::sqrt(d) * normal::kInvSqrt2Pi / f.axis);
}

}  // namespace

double truncated_axis_probability(double center, double sigma, double a, double b, double lo,
                                  double hi) {
  return axis_mass(center, sigma, lo, hi) / axis_mass(center, sigma, a, b);
}

void validate(const KernelParams& p) {
  auto positive = [](double v) { return v > 0.0 && std::isfinite(v); };
  if (!positive(p.q_sigma)) throw ConfigError("kernels.q_sigma must be positive");
  if (!positive(p.p_sigma)) throw ConfigError("kernels.p_sigma must be positive");
  if (!positive(p.pprime_sigma)) throw ConfigError("kernels.pprime_sigma must be positive");
  if (p.q0_kind == Q0Kind::TruncatedGaussian && !positive(p.q0_sigma)) {
    throw ConfigError("kernels.q0_sigma must be positive");
  }
  if (!(p.eps_q > 0.0 && p.eps_q < 1.0)) throw ConfigError("kernels.eps_q must lie in (0, 1)");
}

KernelBank derive_constants(const KernelParams& params, const BoxDomain& dom) {
  validate(params);
  if (!(dom.volume() > 0.0)) throw ConfigError("domain has zero volume");

  KernelBank bank{params, {}};
  DerivedConstants& c = bank.derived;
  const std::size_t d = dom.dim;
  const double vol = dom.volume();
  const double sp = params.p_sigma;
  const double spp = params.pprime_sigma;

  c.m_p = normal::iso_peak(d, sp);
  c.m_pprime = normal::iso_peak(d, spp);
  c.m_p_pprime = std::max(c.m_p, c.m_pprime);
  c.mbar_p = 1.0;
  c.mbar_p_pprime = 1.0;
  c.l_p = c.m_p / (sp * std::sqrt(std::numbers::e));
  c.l_pprime = c.m_pprime / (spp * std::sqrt(std::numbers::e));
  c.lbar_p_pprime = std::max(c.l_p, c.l_pprime);

  const double sq = params.q_sigma;
  c.m_q = params.eps_q / vol +
          (1.0 - params.eps_q) * normal::iso_peak(d, sq) / truncation_floor(sq, dom).joint;
  c.l_q = (1.0 - params.eps_q) * vol * truncated_gradient_bound(sq, dom);
  if (params.q0_kind == Q0Kind::Uniform) {
    c.m_q0 = 1.0 / vol;
    c.l_q0 = 0.0;
  } else {
    const double s0 = params.q0_sigma;
    c.m_q0 = normal::iso_peak(d, s0) / truncation_floor(s0, dom).joint;
    c.l_q0 = vol * truncated_gradient_bound(s0, dom);
  }
  c.m_q_q0 = std::max(c.m_q, c.m_q0);
  c.l_q_q0 = std::max(c.l_q, c.l_q0);

  // P'(x, E) is smallest at a corner of E; the density P'(x, y) on E x E is
  // smallest at opposite corners.
  c.alpha_pprime = truncation_floor(spp, dom).joint;
  const double diam = dom.diameter();
  c.delta_pprime = vol * c.m_pprime * std::exp(-0.5 * diam * diam / (spp * spp));
  c.beta_pprime = 1.0 - c.alpha_pprime * c.delta_pprime;
  return bank;
}

double field_sigma(const KernelBank& bank, FieldKernel which) {
  return which == FieldKernel::P ? bank.params.p_sigma : bank.params.pprime_sigma;
}

double q_density(const Point& x, const Point& y, const KernelBank& bank, const BoxDomain& dom) {
  dom.require_inside(x, "q_density");
  dom.require_inside(y, "q_density");
  const double eq = bank.params.eps_q;
  return eq / dom.volume() + (1.0 - eq) * truncated_density(x, y, bank.params.q_sigma, dom);
}

double q0_density(const Point& x, const Point& y, const KernelBank& bank, const BoxDomain& dom) {
  dom.require_inside(x, "q0_density");
  dom.require_inside(y, "q0_density");
  if (bank.params.q0_kind == Q0Kind::Uniform) return 1.0 / dom.volume();
  return truncated_density(x, y, bank.params.q0_sigma, dom);
}

double p_density(const Point& x, const Point& y, FieldKernel which, const KernelBank& bank,
                 const BoxDomain& dom) {
  return normal::iso_pdf(dom.dim, squared_distance(x, y), field_sigma(bank, which));
}

double q_box_probability(const Point& x, const Point& lo, const Point& hi, const KernelBank& bank,
                         const BoxDomain& dom) {
  dom.require_inside(x, "q_box_probability");
  const double eq = bank.params.eps_q;
  return eq * uniform_box_probability(lo, hi, dom) +
         (1.0 - eq) * truncated_box_probability(x, bank.params.q_sigma, lo, hi, dom);
}

double q0_box_probability(const Point& x, const Point& lo, const Point& hi, const KernelBank& bank,
                          const BoxDomain& dom) {
  dom.require_inside(x, "q0_box_probability");
  if (bank.params.q0_kind == Q0Kind::Uniform) return uniform_box_probability(lo, hi, dom);
  return truncated_box_probability(x, bank.params.q0_sigma, lo, hi, dom);
}

Point sample_uniform(const BoxDomain& dom, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Point y{};
  for (std::size_t a = 0; a < dom.dim; ++a) y[a] = dom.lower[a] + u(rng) * dom.width(a);
  return y;
}

Point sample_truncated_gaussian(const Point& x, double sigma, const BoxDomain& dom, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Point y{};
  for (int attempt = 0; attempt < kRejectionCap; ++attempt) {
    for (std::size_t a = 0; a < dom.dim; ++a) y[a] = x[a] + sigma * gauss(rng);
    if (dom.contains(y)) return y;
  }
  // The box truncation factorises over axes, so per-axis inverse-CDF draws
  // have exactly the same law.
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t a = 0; a < dom.dim; ++a) {
    const double lo = normal::cdf((dom.lower[a] - x[a]) / sigma);
    const double hi = normal::cdf((dom.upper[a] - x[a]) / sigma);
    const double z = normal::quantile(lo + u(rng) * (hi - lo));
    y[a] = std::clamp(x[a] + sigma * z, dom.lower[a], dom.upper[a]);
  }
  return y;
}

Point q_sample(const Point& x, const KernelBank& bank, const BoxDomain& dom, Rng& rng) {
  dom.require_inside(x, "q_sample");
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < bank.params.eps_q) return sample_uniform(dom, rng);
  return sample_truncated_gaussian(x, bank.params.q_sigma, dom, rng);
}

Point q0_sample(const Point& x, const KernelBank& bank, const BoxDomain& dom, Rng& rng) {
  dom.require_inside(x, "q0_sample");
  if (bank.params.q0_kind == Q0Kind::Uniform) return sample_uniform(dom, rng);
  return sample_truncated_gaussian(x, bank.params.q0_sigma, dom, rng);
}

std::vector<double> truncated_cell_table(const GridSpec& grid, std::size_t axis, double sigma) {
  const std::size_t n = grid.cells[axis];
  const double h = grid.step[axis];
  const double a = grid.origin[axis];
  std::vector<double> table(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = grid.center_coord(axis, i);
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double lo = a + static_cast<double>(j) * h;
      const double p = axis_mass(c, sigma, lo, lo + h);
      table[i * n + j] = p;
      row += p;
    }
    for (std::size_t j = 0; j < n; ++j) table[i * n + j] /= row;
  }
  return table;
}

}  // namespace agentfield
