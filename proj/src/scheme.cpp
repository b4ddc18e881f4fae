#include "agentfield/scheme.hpp"

#include <cmath>

#include "agentfield/parallel.hpp"

namespace agentfield {

SchemeState init_scheme(const Model& model, const InitialCondition& ic, const SystemOptions& opt) {
  if (opt.n_agents == 0) throw ConfigError("run.n_agents must be >= 1");
  const std::size_t n = opt.n_agents;
  SchemeState s{EmpiricalMeasure{model.domain().dim, std::vector<Point>(n)},
                initial_eta_mixture(ic, model),
                0,
                {},
                make_stream(opt.seed, kTagResample, 0)};
  s.streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng init = make_stream(opt.seed, kTagInit, i);
    s.positions.points[i] = sample_m0(ic, model, init);
    s.streams.push_back(make_stream(opt.seed, kTagAgents, i));
  }
  return s;
}

SchemeState scheme_step(SchemeState s, const Model& model, std::size_t threads) {
  const EmpiricalMeasure before = s.positions;
  const std::size_t n = before.size();
  const double eps = model.eps();
  {
    const PotentialField psi(s.field);
    parallel_for(n, threads, [&](std::size_t i) {
      s.positions.points[i] = m_psi_sample(before.points[i], psi, model.lambda(), model.bank(),
                                           model.domain(), s.streams[i]);
    });
  }
  GaussianMixture next;
  next.dim = s.field.dim;
  next.components.reserve(2 * n);
  const double each = 1.0 / static_cast<double>(n);
  if (eps < 1.0) {
    const MixtureSampler draw(s.field);
    const double sp = model.bank().params.p_sigma;
    for (std::size_t i = 0; i < n; ++i) next.components.push_back({(1.0 - eps) * each, draw(s.resample), sp});
  }
  if (eps > 0.0) {
    const double spp = model.bank().params.pprime_sigma;
    for (const Point& x : before.points) next.components.push_back({eps * each, x, spp});
  }
  s.field = std::move(next);
  ++s.k;
  return s;
}

std::vector<SchemeSnapshot> run_scheme(const Model& model, const InitialCondition& ic,
                                       const SystemOptions& opt) {
  std::vector<SchemeSnapshot> out;
  SchemeState s = init_scheme(model, ic, opt);
  auto wanted = [&](std::size_t k) {
    if (opt.snapshot_steps.empty()) return true;
    for (std::size_t t : opt.snapshot_steps) {
      if (t == k) return true;
    }
    return false;
  };
  if (wanted(0)) out.push_back({0, s.positions, s.field});
  for (std::size_t k = 1; k <= opt.horizon; ++k) {
    s = scheme_step(std::move(s), model, opt.threads);
    if (wanted(k)) out.push_back({k, s.positions, s.field});
  }
  return out;
}

GaussianMixture exact_field_oracle(std::span<const EmpiricalMeasure> history,
                                   const GaussianMixture& eta0, const Model& model,
                                   std::size_t budget) {
  const std::size_t k = history.size();
  const double eps = model.eps();
  const double sp = model.bank().params.p_sigma;
  const double spp = model.bank().params.pprime_sigma;
  std::size_t count = eps < 1.0 ? eta0.components.size() : 0;
  if (eps > 0.0) {
    for (const auto& m : history) count += m.size();
  }
  if (count > budget) {
    throw CapacityError("exact_field_oracle: " + std::to_string(count) + " components exceed budget " +
                        std::to_string(budget));
  }
  GaussianMixture out;
  out.dim = eta0.dim;
  out.components.reserve(count);
  const double kd = static_cast<double>(k);
  if (eps < 1.0) {
    const double decay = std::pow(1.0 - eps, kd);
    for (const auto& c : eta0.components) {
      out.components.push_back({decay * c.weight, c.mean, std::sqrt(c.sigma * c.sigma + kd * sp * sp)});
    }
  }
  if (eps > 0.0) {
    for (std::size_t j = 0; j < k; ++j) {
      const EmpiricalMeasure& m = history[k - 1 - j];
      if (m.points.empty()) continue;
      const double jd = static_cast<double>(j);
      const double w = eps * std::pow(1.0 - eps, jd) / static_cast<double>(m.size());
      const double sigma = std::sqrt(spp * spp + jd * sp * sp);
      for (const Point& x : m.points) out.components.push_back({w, x, sigma});
    }
  }
  // Components with weight (1 - eps)^k underflow only for eps near 1.
  std::erase_if(out.components, [](const auto& c) { return !(c.weight > 0.0); });
  return out;
}

}  // namespace agentfield
