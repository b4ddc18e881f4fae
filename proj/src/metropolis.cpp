#include "agentfield/metropolis.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "agentfield/normal.hpp"

namespace agentfield {

namespace {

// out = in contracted with per-axis tables along every axis. With
// `transpose` false this is sum_i in_i prod_a T_a[i_a][j_a] (measure
// action); with true it is sum_j T[i][j] in_j (function action).
std::vector<double> separable_contract(const GridSpec& g,
                                       const std::array<std::vector<double>, kMaxDim>& tables,
                                       std::span<const double> in, bool transpose) {
  std::vector<double> cur(in.begin(), in.end());
  std::vector<double> next(cur.size());
  for (std::size_t a = 0; a < g.dim; ++a) {
    const std::size_t n = g.cells[a];
    const std::size_t stride = g.stride(a);
    const std::size_t outer = cur.size() / (n * stride);
    const std::vector<double>& t = tables[a];
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t s = 0; s < stride; ++s) {
        const std::size_t base = o * n * stride + s;
        for (std::size_t i = 0; i < n; ++i) {
          const double v = cur[base + i * stride];
          if (!transpose) {
            if (v == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) next[base + j * stride] += v * t[i * n + j];
          } else {
            double acc = 0.0;
            for (std::size_t j = 0; j < n; ++j) acc += t[i * n + j] * cur[base + j * stride];
            next[base + i * stride] = acc;
          }
        }
      }
    }
    cur.swap(next);
  }
  return cur;
}

double product_entry(const GridSpec& g, const std::array<std::vector<double>, kMaxDim>& tables,
                     std::size_t i, std::size_t j) {
  const Index ii = g.unflatten(i);
  const Index jj = g.unflatten(j);
  double p = 1.0;
  for (std::size_t a = 0; a < g.dim; ++a) p *= tables[a][ii[a] * g.cells[a] + jj[a]];
  return p;
}

double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

double PotentialField::operator()(const Point& x) const {
  if (const auto* g = std::get_if<GridDensity>(&rep_)) return g->at(x);
  return mixture_eval(std::get<GaussianMixture>(rep_), x);
}

std::vector<double> PotentialField::on_grid(const GridSpec& e_grid) const {
  std::vector<double> out(e_grid.size());
  if (const auto* g = std::get_if<GridDensity>(&rep_)) {
    const GridSpec& fs = g->spec();
    bool aligned = fs.dim == e_grid.dim;
    for (std::size_t a = 0; aligned && a < fs.dim; ++a) {
      const double off = (e_grid.origin[a] - fs.origin[a]) / fs.step[a];
      aligned = std::abs(fs.step[a] - e_grid.step[a]) <= 1e-12 * e_grid.step[a] &&
                std::abs(off - std::round(off)) <= 1e-9 && off >= -1e-9 &&
                std::round(off) + static_cast<double>(e_grid.cells[a]) <=
                    static_cast<double>(fs.cells[a]);
    }
    if (aligned) {
      for (std::size_t i = 0; i < out.size(); ++i) {
        Index idx = e_grid.unflatten(i);
        for (std::size_t a = 0; a < fs.dim; ++a) {
          idx[a] += static_cast<std::size_t>(std::round((e_grid.origin[a] - fs.origin[a]) / fs.step[a]));
        }
        out[i] = (*g)[fs.flatten(idx)];
      }
      return out;
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = (*this)(e_grid.center(i));
  return out;
}

double PotentialField::oscillation() const {
  if (const auto* g = std::get_if<GridDensity>(&rep_)) return agentfield::oscillation(*g);
  const auto& mix = std::get<GaussianMixture>(rep_);
  double s = 0.0;
  for (const auto& c : mix.components) s += c.weight * normal::iso_peak(mix.dim, c.sigma);
  return s;
}

Point m_psi_sample(const Point& x, const PotentialField& psi, double lambda, const KernelBank& bank,
                   const BoxDomain& dom, Rng& rng) {
  dom.require_inside(x, "m_psi_sample");
  const Point y = q_sample(x, bank, dom, rng);
  const double w = lambda == 0.0 ? 1.0 : accept_weight(psi(x), psi(y), lambda);
  if (w >= 1.0) return y;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < w) return y;
  // The fallback draw is independent of Y, so drawing it only when Y is
  // rejected gives the same law.
  return q0_sample(x, bank, dom, rng);
}

std::vector<double> GridOperator::row(std::size_t i) const {
  std::vector<double> delta(grid_.size(), 0.0);
  delta[i] = 1.0;
  return apply(delta);
}

GridDensity GridOperator::push(const GridDensity& m) const {
  if (!(m.spec() == grid_)) throw DomainError("GridOperator::push: mismatched grid");
  return {grid_, apply(m.values()), m.support()};
}

QGridOperator::QGridOperator(const GridSpec& e_grid, const KernelBank& bank)
    : GridOperator(e_grid), eps_q_(bank.params.eps_q) {
  for (std::size_t a = 0; a < e_grid.dim; ++a) {
    tables_[a] = truncated_cell_table(e_grid, a, bank.params.q_sigma);
  }
}

std::vector<double> QGridOperator::apply(std::span<const double> m) const {
  std::vector<double> out = separable_contract(grid_, tables_, m, false);
  const double floor = eps_q_ * sum(m) / static_cast<double>(grid_.size());
  for (double& v : out) v = floor + (1.0 - eps_q_) * v;
  return out;
}

std::vector<double> QGridOperator::apply_function(std::span<const double> f) const {
  std::vector<double> out = separable_contract(grid_, tables_, f, true);
  const double mean = sum(f) / static_cast<double>(grid_.size());
  for (double& v : out) v = eps_q_ * mean + (1.0 - eps_q_) * v;
  return out;
}

double QGridOperator::entry(std::size_t i, std::size_t j) const {
  return eps_q_ / static_cast<double>(grid_.size()) +
         (1.0 - eps_q_) * product_entry(grid_, tables_, i, j);
}

Q0GridOperator::Q0GridOperator(const GridSpec& e_grid, const KernelBank& bank)
    : GridOperator(e_grid), uniform_(bank.params.q0_kind == Q0Kind::Uniform) {
  if (!uniform_) {
    for (std::size_t a = 0; a < e_grid.dim; ++a) {
      tables_[a] = truncated_cell_table(e_grid, a, bank.params.q0_sigma);
    }
  }
}

std::vector<double> Q0GridOperator::apply(std::span<const double> m) const {
  if (!uniform_) return separable_contract(grid_, tables_, m, false);
  return std::vector<double>(grid_.size(), sum(m) / static_cast<double>(grid_.size()));
}

std::vector<double> Q0GridOperator::apply_function(std::span<const double> f) const {
  if (!uniform_) return separable_contract(grid_, tables_, f, true);
  return std::vector<double>(grid_.size(), sum(f) / static_cast<double>(grid_.size()));
}

double Q0GridOperator::entry(std::size_t i, std::size_t j) const {
  if (uniform_) return 1.0 / static_cast<double>(grid_.size());
  return product_entry(grid_, tables_, i, j);
}

MetropolisGridOperator::MetropolisGridOperator(const GridSpec& e_grid, std::vector<double> psi,
                                               double lambda, const KernelBank& bank)
    : GridOperator(e_grid), q_(e_grid, bank), q0_(e_grid, bank), psi_(std::move(psi)),
      lambda_(lambda) {
  if (psi_.size() != e_grid.size()) throw DomainError("MetropolisGridOperator: psi size mismatch");
  const std::size_t n = e_grid.size();
  accept_mass_.assign(n, 0.0);
  if (n * n <= kDenseOperatorLimit) {
    dense_.resize(n * n);
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double k = q_.entry(i, j) * accept_weight(psi_[i], psi_[j], lambda_);
        dense_[i * n + j] = k;
        r += k;
      }
      accept_mass_[i] = r;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0;
      for (std::size_t j = 0; j < n; ++j) r += accepted_entry(i, j);
      accept_mass_[i] = r;
    }
  }
}

double MetropolisGridOperator::accepted_entry(std::size_t i, std::size_t j) const {
  if (!dense_.empty()) return dense_[i * grid_.size() + j];
  return q_.entry(i, j) * accept_weight(psi_[i], psi_[j], lambda_);
}

std::vector<double> MetropolisGridOperator::apply(std::span<const double> m) const {
  const std::size_t n = grid_.size();
  std::vector<double> rejected(n);
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    rejected[i] = m[i] * (1.0 - accept_mass_[i]);
    if (m[i] == 0.0) continue;
    if (!dense_.empty()) {
      const double* rowp = dense_.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) out[j] += m[i] * rowp[j];
    } else {
      for (std::size_t j = 0; j < n; ++j) out[j] += m[i] * accepted_entry(i, j);
    }
  }
  const std::vector<double> fallback = q0_.apply(rejected);
  for (std::size_t j = 0; j < n; ++j) out[j] += fallback[j];
  return out;
}

std::vector<double> MetropolisGridOperator::apply_function(std::span<const double> f) const {
  const std::size_t n = grid_.size();
  const std::vector<double> q0f = q0_.apply_function(f);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < n; ++j) acc += accepted_entry(i, j) * f[j];
    out[i] = acc + (1.0 - accept_mass_[i]) * q0f[i];
  }
  return out;
}

GridDensity m_psi_pushforward(const GridDensity& m, const PotentialField& psi, double lambda,
                              const KernelBank& bank) {
  const MetropolisGridOperator op(m.spec(), psi.on_grid(m.spec()), lambda, bank);
  GridDensity out = op.push(m);
  out.normalize();
  return out;
}

double m_psi_lipschitz_bound(const KernelBank& bank, double lambda, double l_eta) {
  return bank.derived.l_q_q0 * (3.0 + 2.0 * lambda * l_eta);
}

}  // namespace agentfield
