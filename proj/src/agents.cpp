#include "agentfield/agents.hpp"

#include <cmath>

#include "agentfield/parallel.hpp"

namespace agentfield {

AgentSystemState init_system(const Model& model, const InitialCondition& ic, const SystemOptions& opt) {
  if (opt.n_agents == 0) throw ConfigError("run.n_agents must be >= 1");
  const std::size_t n = opt.n_agents;
  AgentSystemState s{EmpiricalMeasure{model.domain().dim, std::vector<Point>(n)},
                     opt.mode == FieldMode::Grid ? PotentialField(initial_eta(ic, model))
                                                 : PotentialField(initial_eta_mixture(ic, model)),
                     0,
                     {}};
  s.streams.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng init = make_stream(opt.seed, kTagInit, i);
    s.positions.points[i] = sample_m0(ic, model, init);
    s.streams.push_back(make_stream(opt.seed, kTagAgents, i));
  }
  return s;
}

AgentSystemState system_step(AgentSystemState s, const Model& model, std::size_t threads,
                             std::size_t mixture_budget) {
  const EmpiricalMeasure before = s.positions;
  parallel_for(before.size(), threads, [&](std::size_t i) {
    s.positions.points[i] = m_psi_sample(before.points[i], s.field, model.lambda(), model.bank(),
                                         model.domain(), s.streams[i]);
  });
  if (s.field.is_grid()) {
    s.field = PotentialField(field_update(s.field.grid(), before, model).eta);
  } else {
    GaussianMixture next = mixture_field_update(s.field.mixture(), before, model);
    if (next.components.size() > mixture_budget) {
      throw CapacityError("system_step: exact mixture field exceeds " + std::to_string(mixture_budget) +
                          " components");
    }
    s.field = PotentialField(std::move(next));
  }
  ++s.k;
  return s;
}

namespace {

bool wanted(const std::vector<std::size_t>& steps, std::size_t k) {
  if (steps.empty()) return true;
  for (std::size_t s : steps) {
    if (s == k) return true;
  }
  return false;
}

}  // namespace

std::vector<AgentSnapshot> run_system(const Model& model, const InitialCondition& ic,
                                      const SystemOptions& opt) {
  std::vector<AgentSnapshot> out;
  AgentSystemState s = init_system(model, ic, opt);
  if (wanted(opt.snapshot_steps, 0)) out.push_back({0, s.positions, s.field});
  for (std::size_t k = 1; k <= opt.horizon; ++k) {
    s = system_step(std::move(s), model, opt.threads, opt.mixture_budget);
    if (wanted(opt.snapshot_steps, k)) out.push_back({k, s.positions, s.field});
  }
  return out;
}

GridDensity field_on_grid(const PotentialField& field, const Model& model) {
  if (field.is_grid()) return field.grid();
  return rasterize(field.mixture(), model.field_grid(), Support::FieldBox).density;
}

namespace {

// Calls fn(blocks) for every set partition of {0, .., p-1}, via restricted
// growth strings.
template <class F>
void for_each_partition(std::size_t p, F&& fn) {
  std::vector<std::size_t> label(p, 0);
  while (true) {
    std::size_t blocks = 0;
    for (std::size_t l : label) blocks = std::max(blocks, l + 1);
    std::vector<std::vector<std::size_t>> parts(blocks);
    for (std::size_t i = 0; i < p; ++i) parts[label[i]].push_back(i);
    fn(parts);
    // Next restricted growth string: label[i] <= 1 + max(label[0..i-1]).
    std::size_t i = p;
    while (i-- > 1) {
      std::size_t prefix_max = 0;
      for (std::size_t j = 0; j < i; ++j) prefix_max = std::max(prefix_max, label[j]);
      if (label[i] <= prefix_max) {
        ++label[i];
        for (std::size_t j = i + 1; j < p; ++j) label[j] = 0;
        break;
      }
    }
    if (i == 0) return;
  }
}

// Average of prod_i phi_i(X_{j_i}) over ordered tuples of distinct agents,
// by Moebius inversion over set partitions.
double distinct_tuple_mean(const std::vector<std::vector<double>>& vals, std::size_t n) {
  const std::size_t p = vals.size();
  double total = 0.0;
  for_each_partition(p, [&](const std::vector<std::vector<std::size_t>>& parts) {
    double coeff = 1.0;
    double term = 1.0;
    for (const auto& block : parts) {
      const std::size_t b = block.size();
      double fact = 1.0;
      for (std::size_t t = 2; t < b; ++t) fact *= static_cast<double>(t);
      coeff *= ((b - 1) % 2 == 0 ? 1.0 : -1.0) * fact;
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        double prod = 1.0;
        for (std::size_t i : block) prod *= vals[i][j];
        s += prod;
      }
      term *= s;
    }
    total += coeff * term;
  });
  double tuples = 1.0;
  for (std::size_t t = 0; t < p; ++t) tuples *= static_cast<double>(n - t);
  return total / tuples;
}

}  // namespace

ProductGap marginal_product_gap(std::span<const EmpiricalMeasure> replicas,
                                std::span<const TestFunction> phis, std::span<const double> targets) {
  const std::size_t p = phis.size();
  if (p == 0 || targets.size() != p) throw DomainError("marginal_product_gap: need one target per function");
  ProductGap g;
  g.replicas = replicas.size();
  if (replicas.empty()) return g;
  std::vector<double> u;
  u.reserve(replicas.size());
  for (const EmpiricalMeasure& r : replicas) {
    const std::size_t n = r.size();
    if (n < p) throw DomainError("marginal_product_gap: fewer agents than functions");
    std::vector<std::vector<double>> vals(p, std::vector<double>(n));
    for (std::size_t i = 0; i < p; ++i) {
      for (std::size_t j = 0; j < n; ++j) vals[i][j] = phis[i](r.points[j]);
    }
    u.push_back(distinct_tuple_mean(vals, n));
  }
  double mean = 0.0;
  for (double v : u) mean += v;
  mean /= static_cast<double>(u.size());
  double var = 0.0;
  for (double v : u) var += (v - mean) * (v - mean);
  if (u.size() > 1) var /= static_cast<double>(u.size() - 1);
  double target = 1.0;
  for (double t : targets) target *= t;
  g.mean = mean;
  g.gap = std::abs(mean - target);
  g.std_error = std::sqrt(var / static_cast<double>(u.size()));
  return g;
}

}  // namespace agentfield
