#include "agentfield/meanfield.hpp"

#include <algorithm>
#include <cmath>

#include "agentfield/metropolis.hpp"
#include "agentfield/normal.hpp"

namespace agentfield {

namespace {

// Gaussian weights below exp(-39) of the peak are dropped.
constexpr double kKernelRadiusSigmas = 8.9;

double feasibility_margin(double eps, double lambda, const KernelBank& bank) {
  const DerivedConstants& c = bank.derived;
  const double m = c.m_p_pprime;
  const double s = std::max(1.0 - eps, 1.0 - bank.params.eps_q * std::exp(-lambda * m) + eps * c.beta_pprime);
  return 1.0 - s - 4.0 * lambda * m;
}

// Boundary of {x : feasible(x)} between a feasible and an infeasible point.
template <class F>
double bisect_boundary(F&& feasible, double inside, double outside) {
  for (int it = 0; it < 200 && std::abs(outside - inside) > 1e-14; ++it) {
    const double mid = 0.5 * (inside + outside);
    if (feasible(mid)) inside = mid; else outside = mid;
  }
  return inside;
}

}  // namespace

FieldConvolver::FieldConvolver(const GridSpec& grid, double sigma) : grid_(grid), sigma_(sigma) {
  for (std::size_t a = 0; a < grid.dim; ++a) {
    const std::size_t n = grid.cells[a];
    const double h = grid.step[a];
    const auto reach = std::min<std::size_t>(
        n - 1, static_cast<std::size_t>(std::ceil(kKernelRadiusSigmas * sigma / h)));
    auto& w = weights_[a];
    w.resize(reach + 1);
    for (std::size_t k = 0; k <= reach; ++k) {
      w[k] = h * normal::pdf(static_cast<double>(k) * h / sigma) / sigma;
    }
    auto& rm = row_mass_[a];
    rm.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t lo = i >= reach ? i - reach : 0;
      const std::size_t hi = std::min(n - 1, i + reach);
      double s = 0.0;
      for (std::size_t j = lo; j <= hi; ++j) s += w[i > j ? i - j : j - i];
      rm[i] = s;
    }
  }
}

std::vector<double> FieldConvolver::apply(std::span<const double> density, double* leaked) const {
  if (leaked != nullptr) {
    double lost = 0.0;
    for (std::size_t flat = 0; flat < density.size(); ++flat) {
      if (density[flat] == 0.0) continue;
      const Index idx = grid_.unflatten(flat);
      double kept = 1.0;
      for (std::size_t a = 0; a < grid_.dim; ++a) kept *= row_mass_[a][idx[a]];
      lost += density[flat] * std::max(0.0, 1.0 - kept);
    }
    *leaked = lost * grid_.cell_volume();
  }
  std::vector<double> cur(density.begin(), density.end());
  std::vector<double> next(cur.size());
  for (std::size_t a = 0; a < grid_.dim; ++a) {
    const std::size_t n = grid_.cells[a];
    const std::size_t stride = grid_.stride(a);
    const std::size_t outer = cur.size() / (n * stride);
    const auto& w = weights_[a];
    const auto& rm = row_mass_[a];
    const std::size_t reach = w.size() - 1;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t s = 0; s < stride; ++s) {
        const std::size_t base = o * n * stride + s;
        for (std::size_t i = 0; i < n; ++i) {
          const double v = cur[base + i * stride];
          if (v == 0.0) continue;
          const double scaled = v / rm[i];
          const std::size_t lo = i >= reach ? i - reach : 0;
          const std::size_t hi = std::min(n - 1, i + reach);
          for (std::size_t j = lo; j <= hi; ++j) {
            next[base + j * stride] += scaled * w[i > j ? i - j : j - i];
          }
        }
      }
    }
    cur.swap(next);
  }
  return cur;
}

Model::Model(const BoxDomain& dom, const KernelParams& kernels, std::size_t cells_per_axis,
             double eps, double lambda)
    : dom_(dom),
      bank_(derive_constants(kernels, dom)),
      e_grid_(make_e_grid(dom, cells_per_axis)),
      field_grid_(make_field_grid(dom, cells_per_axis)),
      eps_(eps),
      lambda_(lambda),
      p_conv_(field_grid_, kernels.p_sigma),
      pprime_conv_(field_grid_, kernels.pprime_sigma),
      e_in_field_(e_cells_in_field(e_grid_, field_grid_)) {
  if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("dynamics.eps must lie in [0, 1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("dynamics.lambda must be >= 0");
}

Model Model::with(double eps, double lambda) const {
  Model copy = *this;
  if (!(eps >= 0.0 && eps <= 1.0)) throw ConfigError("dynamics.eps must lie in [0, 1]");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("dynamics.lambda must be >= 0");
  copy.eps_ = eps;
  copy.lambda_ = lambda;
  return copy;
}

GridDensity embed_in_field(const GridDensity& m, const Model& model) {
  if (!(m.spec() == model.e_grid())) throw DomainError("embed_in_field: m is not on the E grid");
  GridDensity out = GridDensity::zeros(model.field_grid(), Support::FieldBox);
  const auto& map = model.e_in_field();
  for (std::size_t i = 0; i < m.size(); ++i) out.values()[map[i]] = m[i];
  return out;
}

namespace {

FieldUpdate combine(const GridDensity& eta, std::vector<double> agent_part, double agent_leak,
                    const Model& model) {
  const double eps = model.eps();
  std::vector<double> values(model.field_grid().size(), 0.0);
  double leak = 0.0;
  if (eps < 1.0) {
    double lp = 0.0;
    const std::vector<double> diffused = model.p_convolver().apply(eta.values(), &lp);
    for (std::size_t i = 0; i < values.size(); ++i) values[i] = (1.0 - eps) * diffused[i];
    leak += (1.0 - eps) * lp;
  }
  if (eps > 0.0) {
    for (std::size_t i = 0; i < values.size(); ++i) values[i] += eps * agent_part[i];
    leak += eps * agent_leak;
  }
  FieldUpdate out{GridDensity(model.field_grid(), std::move(values), Support::FieldBox), leak};
  out.eta.normalize();
  return out;
}

}  // namespace

FieldUpdate field_update(const GridDensity& eta, const GridDensity& m, const Model& model) {
  if (!(eta.spec() == model.field_grid())) throw DomainError("field_update: eta is not on the field grid");
  std::vector<double> agent_part;
  double leak = 0.0;
  if (model.eps() > 0.0) {
    const GridDensity embedded = embed_in_field(m, model);
    agent_part = model.pprime_convolver().apply(embedded.values(), &leak);
  }
  return combine(eta, std::move(agent_part), leak, model);
}

FieldUpdate field_update(const GridDensity& eta, const EmpiricalMeasure& m, const Model& model) {
  if (!(eta.spec() == model.field_grid())) throw DomainError("field_update: eta is not on the field grid");
  std::vector<double> agent_part;
  double leak = 0.0;
  if (model.eps() > 0.0 && !m.points.empty()) {
    const GridSpec& g = model.field_grid();
    const double sigma = model.bank().params.pprime_sigma;
    const double each = 1.0 / static_cast<double>(m.points.size());
    agent_part.assign(g.size(), 0.0);
    std::array<std::vector<double>, kMaxDim> factor;
    std::array<std::size_t, kMaxDim> lo{}, hi{};
    for (const Point& x : m.points) {
      for (std::size_t a = 0; a < g.dim; ++a) {
        factor[a].assign(g.cells[a], 0.0);
        const double reach = kKernelRadiusSigmas * sigma;
        const double first = std::floor((x[a] - reach - g.origin[a]) / g.step[a]);
        const double last = std::floor((x[a] + reach - g.origin[a]) / g.step[a]);
        const double top = static_cast<double>(g.cells[a] - 1);
        lo[a] = static_cast<std::size_t>(std::clamp(first, 0.0, top));
        hi[a] = static_cast<std::size_t>(std::clamp(last, 0.0, top));
        for (std::size_t i = lo[a]; i <= hi[a]; ++i) {
          factor[a][i] = normal::pdf((g.center_coord(a, i) - x[a]) / sigma) / sigma;
        }
      }
      // Visit the bounding box of the truncated kernel.
      Index idx = lo;
      while (true) {
        double v = each;
        for (std::size_t a = 0; a < g.dim; ++a) v *= factor[a][idx[a]];
        agent_part[g.flatten(idx)] += v;
        std::size_t a = g.dim;
        while (a-- > 0) {
          if (idx[a] < hi[a]) { ++idx[a]; break; }
          idx[a] = lo[a];
        }
        if (a == static_cast<std::size_t>(-1)) break;
      }
    }
    double mass = 0.0;
    for (double v : agent_part) mass += v;
    leak = 1.0 - mass * g.cell_volume();
  }
  return combine(eta, std::move(agent_part), leak, model);
}

MeanFieldState phi_step(const MeanFieldState& s, const Model& model) {
  MeanFieldState out;
  out.m = m_psi_pushforward(s.m, PotentialField(s.eta), model.lambda(), model.bank());
  out.eta = field_update(s.eta, s.m, model).eta;
  out.step = s.step + 1;
  return out;
}

double pair_distance(const MeanFieldState& a, const MeanFieldState& b) {
  return tv_distance(a.m, b.m) + tv_distance(a.eta, b.eta);
}

ContractionConstants compute_constants(double eps, double lambda, const KernelBank& bank) {
  ContractionConstants c;
  const DerivedConstants& d = bank.derived;
  const double m = d.m_p_pprime;
  c.eps = eps;
  c.lambda = lambda;
  c.eps_q = bank.params.eps_q;
  c.beta_pprime = d.beta_pprime;
  c.m_p_pprime = m;
  c.s = std::max(1.0 - eps, 1.0 - c.eps_q * std::exp(-lambda * m) + eps * c.beta_pprime);
  c.theta = 0.5 * (c.s + std::sqrt(c.s * c.s + 16.0 * lambda * m));
  c.kappa = c.theta > 0.0 ? 4.0 * lambda * m / c.theta : 0.0;
  c.feasible = c.theta < 1.0 && eps > 0.0 && eps < 1.0;

  // In eps the margin is concave (the sup of a decreasing and an increasing
  // affine map), so the feasible set is an interval around its peak.
  const double cq = 1.0 - c.eps_q * std::exp(-lambda * m);
  const double peak = std::clamp((1.0 - cq) / (1.0 + c.beta_pprime), 0.0, 1.0);
  auto feasible_eps = [&](double e) { return feasibility_margin(e, lambda, bank) > 0.0; };
  if (feasible_eps(peak)) {
    c.eps0 = feasible_eps(1.0) ? 1.0 : bisect_boundary(feasible_eps, peak, 1.0);
    c.eps_min = feasible_eps(0.0) ? 0.0 : bisect_boundary(feasible_eps, peak, 0.0);
  }
  // In lambda the margin is decreasing; any feasible lambda is below 1 / (4M).
  auto feasible_lambda = [&](double l) { return feasibility_margin(eps, l, bank) > 0.0; };
  if (feasible_lambda(0.0)) c.lambda0 = bisect_boundary(feasible_lambda, 0.0, 1.0 / (4.0 * m));
  return c;
}

FixedPointResult fixed_point(const MeanFieldState& initial, const Model& model, double tol,
                             std::size_t max_iter) {
  FixedPointResult r;
  MeanFieldState cur = initial;
  double last = 0.0;
  for (std::size_t k = 0; k < max_iter; ++k) {
    MeanFieldState next = phi_step(cur, model);
    last = pair_distance(cur, next);
    r.trace.push_back(last);
    cur = std::move(next);
    if (last < tol) {
      r.state = std::move(cur);
      r.iterations = k + 1;
      return r;
    }
  }
  throw ConvergenceError("fixed_point: no convergence after " + std::to_string(max_iter) +
                             " iterations, last error " + format_double(last),
                         last);
}

GaussianMixture mixture_field_update(const GaussianMixture& eta, const EmpiricalMeasure& m,
                                     const Model& model) {
  const double eps = model.eps();
  const double sp = model.bank().params.p_sigma;
  GaussianMixture out;
  out.dim = eta.dim;
  if (eps < 1.0) {
    for (const auto& c : eta.components) {
      out.components.push_back({(1.0 - eps) * c.weight, c.mean, std::sqrt(c.sigma * c.sigma + sp * sp)});
    }
  }
  if (eps > 0.0 && !m.points.empty()) {
    const double w = eps / static_cast<double>(m.points.size());
    for (const Point& x : m.points) out.components.push_back({w, x, model.bank().params.pprime_sigma});
  }
  return out;
}

namespace {

Point centered(const Point& c, std::size_t dim) {
  Point p{};
  for (std::size_t a = 0; a < dim; ++a) p[a] = c[a];
  return p;
}

}  // namespace

GridDensity initial_m(const InitialCondition& ic, const Model& model) {
  if (ic.m0_sigma <= 0.0) return GridDensity::uniform(model.e_grid(), Support::E);
  const GaussianMixture g =
      single_gaussian(model.domain().dim, centered(ic.m0_center, model.domain().dim), ic.m0_sigma);
  return rasterize(g, model.e_grid(), Support::E).density;
}

GaussianMixture initial_eta_mixture(const InitialCondition& ic, const Model& model) {
  if (!(ic.eta0_sigma > 0.0)) throw ConfigError("init.eta0_sigma must be positive");
  return single_gaussian(model.domain().dim, centered(ic.eta0_center, model.domain().dim), ic.eta0_sigma);
}

GridDensity initial_eta(const InitialCondition& ic, const Model& model) {
  return rasterize(initial_eta_mixture(ic, model), model.field_grid(), Support::FieldBox).density;
}

MeanFieldState initial_state(const InitialCondition& ic, const Model& model) {
  return {initial_m(ic, model), initial_eta(ic, model), 0};
}

Point sample_m0(const InitialCondition& ic, const Model& model, Rng& rng) {
  if (ic.m0_sigma <= 0.0) return sample_uniform(model.domain(), rng);
  return sample_truncated_gaussian(centered(ic.m0_center, model.domain().dim), ic.m0_sigma,
                                   model.domain(), rng);
}

std::vector<MeanFieldState> meanfield_trajectory(const MeanFieldState& initial, const Model& model,
                                                 std::size_t horizon) {
  std::vector<MeanFieldState> out;
  out.reserve(horizon + 1);
  out.push_back(initial);
  for (std::size_t k = 0; k < horizon; ++k) out.push_back(phi_step(out.back(), model));
  return out;
}

}  // namespace agentfield
