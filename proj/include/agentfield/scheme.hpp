#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "agentfield/agents.hpp"
#include "agentfield/core.hpp"
#include "agentfield/meanfield.hpp"
#include "agentfield/measures.hpp"

namespace agentfield {

/// Particle scheme state: agents plus a Gaussian-mixture field with exactly
/// 2N components for k >= 1 (N when eps is 0 or 1).
struct SchemeState {
  EmpiricalMeasure positions;
  GaussianMixture field;
  std::size_t k = 0;
  std::vector<Rng> streams;  // one per agent
  Rng resample;
};

SchemeState init_scheme(const Model& model, const InitialCondition& ic, const SystemOptions& opt);

/// Agents move against the mixture field; the new field is
/// (1 - eps) S^N(field) P + eps m P' with m the pre-move agents and S^N an
/// i.i.d. resample of N points from the old field.
SchemeState scheme_step(SchemeState s, const Model& model, std::size_t threads = 1);

struct SchemeSnapshot {
  std::size_t k = 0;
  EmpiricalMeasure positions;
  GaussianMixture field;
};

std::vector<SchemeSnapshot> run_scheme(const Model& model, const InitialCondition& ic,
                                       const SystemOptions& opt);

/// Exact field after k = history.size() steps driven by the given agent
/// history m_0 .. m_{k-1}:
///   (1 - eps)^k eta0 P^k + sum_j eps (1 - eps)^j m_{k-1-j} P' P^j,
/// with P' P^j collapsed to one Gaussian of variance sigma_P'^2 + j sigma_P^2.
/// Throws CapacityError when the result would exceed `budget` components.
GaussianMixture exact_field_oracle(std::span<const EmpiricalMeasure> history,
                                   const GaussianMixture& eta0, const Model& model,
                                   std::size_t budget = kDefaultMixtureBudget);

}  // namespace agentfield
