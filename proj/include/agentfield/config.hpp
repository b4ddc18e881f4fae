#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentfield/agents.hpp"
#include "agentfield/experiments.hpp"
#include "agentfield/geometry.hpp"
#include "agentfield/kernels.hpp"
#include "agentfield/meanfield.hpp"

namespace agentfield {

/// Every user-facing knob, with defaults filled in.
struct RunConfig {
  // [domain]
  std::size_t dim = 1;
  Point lower{0.0, 0.0, 0.0};
  Point upper{1.0, 1.0, 1.0};
  std::optional<double> margin;  // default 10 * max(p_sigma, pprime_sigma)
  // [kernels]
  KernelParams kernels;
  // [dynamics]
  double eps = 0.3;
  double lambda = 0.02;
  // [init]
  InitialCondition init;
  // [grid]
  std::optional<std::size_t> cells;  // default 256 (d = 1), 64 (d = 2), 24 (d = 3)
  // [run]
  std::size_t n_agents = 100;
  std::size_t horizon = 10;
  std::uint64_t seed = 1;
  std::size_t parallel = 1;
  FieldMode field_mode = FieldMode::Grid;
  std::size_t mixture_budget = kDefaultMixtureBudget;
  std::vector<std::size_t> snapshots;  // empty: every step
  // [net]
  double net_a = 1.0;
  double net_b = 1.0;
  double net_delta = 0.2;
  std::size_t net_cap = kDefaultNetCap;
  // [fixed_point]
  double fp_tol = kDefaultFixedPointTol;
  std::size_t fp_max_iter = kDefaultFixedPointMaxIter;
  // [experiments]
  std::vector<std::string> checks;  // empty: all
  // [output]
  std::string output_dir;  // empty: $AGENTFIELD_OUT, then "runs"

  [[nodiscard]] double effective_margin() const;
  [[nodiscard]] std::size_t effective_cells() const;
};

/// All violations found in one configuration, each prefixed by its key path.
class ConfigValidationError : public ConfigError {
 public:
  explicit ConfigValidationError(std::vector<std::string> problems);
  [[nodiscard]] const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

struct LoadedConfig {
  RunConfig config;
  std::vector<std::string> warnings;
};

/// Parses INI text. Unknown sections or keys and invalid values are
/// collected and thrown together; an (eps, lambda) outside the contraction
/// region is only a warning.
LoadedConfig parse_config(const std::string& text);
/// Reads and parses a file; a missing file is a ConfigError.
LoadedConfig load_config(const std::string& path);

/// Canonical INI rendering of every effective value except the thread count,
/// which never changes results.
std::string render_config(const RunConfig& c);
/// FNV-1a of render_config, as 16 hex digits.
std::string config_hash(const RunConfig& c);

BoxDomain make_domain(const RunConfig& c);
Model make_model(const RunConfig& c);
SystemOptions system_options(const RunConfig& c);
Setup make_setup(const RunConfig& c);

}  // namespace agentfield
