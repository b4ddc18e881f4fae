#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "agentfield/core.hpp"
#include "agentfield/meanfield.hpp"
#include "agentfield/measures.hpp"
#include "agentfield/metropolis.hpp"

namespace agentfield {

/// How the exact N-agent system stores its field. Mixture mode is exact but
/// grows by N components per step.
enum class FieldMode { Grid, Mixture };

struct AgentSystemState {
  EmpiricalMeasure positions;
  PotentialField field;
  std::size_t k = 0;
  std::vector<Rng> streams;  // one per agent
};

inline constexpr std::size_t kDefaultMixtureBudget = 200000;

struct SystemOptions {
  std::size_t n_agents = 100;
  std::size_t horizon = 10;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  FieldMode mode = FieldMode::Grid;
  std::size_t mixture_budget = kDefaultMixtureBudget;
  /// Steps to record; empty records every step 0..horizon.
  std::vector<std::size_t> snapshot_steps;
};

/// Agents i.i.d. from m0 (agent i uses its own init stream) and eta0.
AgentSystemState init_system(const Model& model, const InitialCondition& ic, const SystemOptions& opt);

/// One step: every agent moves by M^{eta_{k-1}} with its own stream, then the
/// field is updated against the pre-move empirical measure.
AgentSystemState system_step(AgentSystemState s, const Model& model, std::size_t threads = 1,
                             std::size_t mixture_budget = kDefaultMixtureBudget);

struct AgentSnapshot {
  std::size_t k = 0;
  EmpiricalMeasure positions;
  PotentialField field;
};

std::vector<AgentSnapshot> run_system(const Model& model, const InitialCondition& ic,
                                      const SystemOptions& opt);

/// Field of a snapshot on the model's field grid (mixtures are rasterised).
GridDensity field_on_grid(const PotentialField& field, const Model& model);

using TestFunction = std::function<double(const Point&)>;

struct ProductGap {
  double gap = 0.0;       // |mean - prod targets|
  double mean = 0.0;      // replica mean of the U-statistic
  double std_error = 0.0;
  std::size_t replicas = 0;
};

/// Estimates |E[prod_i phi_i(X_i)] - prod_i m(phi_i)| from independent
/// replicas of the agent positions. Within a replica the expectation is
/// estimated by the average over all ordered tuples of distinct agents.
ProductGap marginal_product_gap(std::span<const EmpiricalMeasure> replicas,
                                std::span<const TestFunction> phis, std::span<const double> targets);

}  // namespace agentfield
