#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentfield/artifacts.hpp"
#include "agentfield/meanfield.hpp"
#include "agentfield/measures.hpp"

namespace agentfield {

/// Shared inputs of every check.
struct Setup {
  Model model;
  InitialCondition ic;
  FunctionNet net;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
};

struct CheckReport {
  std::string name;
  bool passed = false;
  nlohmann::json metrics = nlohmann::json::object();
  std::map<std::string, Table> tables;
  double seconds = 0.0;  // wall time; never serialised
};

/// Master seed of a named check, independent of which other checks run.
std::uint64_t check_seed(std::uint64_t seed, const std::string& name);

// --- random inputs ---

/// Random probability density on `spec`: i.i.d. exponential cell values, a
/// random Gaussian mixture, or a few point-like cells.
GridDensity random_density(const GridSpec& spec, Support support, Rng& rng);
/// Random field: a 1-4 component Gaussian mixture centred near E, rasterised
/// on the field grid.
GridDensity random_field(const Model& model, Rng& rng, double min_sigma = 0.1, double max_sigma = 0.4);
MeanFieldState random_state(const Model& model, Rng& rng);

// --- statistics ---

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};
MeanSe mean_se(const std::vector<double>& xs);
/// Least-squares slope of y against x.
double ls_slope(const std::vector<double>& x, const std::vector<double>& y);
/// One-sided p-value of H0: mean <= 0 against mean > 0 (Student t).
double one_sided_p(const std::vector<double>& xs);

// --- checks ---

struct McBoundOptions {
  std::vector<std::size_t> sizes{25, 100, 400};
  std::size_t reps = 200;
};
CheckReport check_mc_bound(const Setup& s, const McBoundOptions& o = {});

struct DobrushinOptions {
  std::vector<double> eps_q{0.1, 0.3, 0.7};
  std::size_t pairs = 100;
  double tol = 1e-10;
};
CheckReport check_dobrushin(const Setup& s, const DobrushinOptions& o = {});

struct MetropolisContractionOptions {
  std::vector<double> extra_lambdas{2.0};  // in addition to the model's lambda
  std::size_t fields = 5;
  std::size_t pairs = 50;
  double tol = 1e-10;
};
CheckReport check_metropolis_contraction(const Setup& s, const MetropolisContractionOptions& o = {});

struct FixedPointOptions {
  std::size_t inits = 5;
  double tol = 1e-11;
  double pair_tol = 2e-8;
  double recursion_tol = 1e-10;
};
CheckReport check_fixed_point(const Setup& s, const FixedPointOptions& o = {});

struct TwoTrajectoryOptions {
  std::size_t pairs = 10;
  std::vector<std::size_t> horizons{2, 5, 10};
  double tol = 1e-10;
};
CheckReport check_two_trajectory(const Setup& s, const TwoTrajectoryOptions& o = {});

struct FiniteHorizonOptions {
  std::vector<std::size_t> sizes{25, 100, 400};
  std::size_t seeds = 50;
  std::size_t horizon = 10;
  double max_slope = -0.3;
};
CheckReport check_finite_horizon_agents(const Setup& s, const FiniteHorizonOptions& o = {});

struct SchemeHorizonOptions {
  FiniteHorizonOptions trend{{25, 100, 400}, 50, 5, -0.3};
  std::size_t oracle_agents = 200;
  std::size_t oracle_horizon = 3;
  std::size_t oracle_seeds = 50;
  double raster_tol = 1e-3;
};
CheckReport check_finite_horizon_scheme(const Setup& s, const SchemeHorizonOptions& o = {});

struct UniformInTimeOptions {
  std::size_t n_agents = 400;
  std::vector<std::size_t> horizons{10, 50, 200};
  std::size_t seeds = 20;
  double max_ratio = 2.0;
  double alpha = 0.05;
};
CheckReport check_uniform_in_time(const Setup& s, const UniformInTimeOptions& o = {});

struct CommutingLimitsOptions {
  std::vector<std::size_t> horizons{0, 3, 10, 30};
  std::vector<std::size_t> sizes{25, 100, 400};
  std::size_t seeds = 20;
};
CheckReport check_commuting_limits(const Setup& s, const CommutingLimitsOptions& o = {});

/// The product gap needs strong interaction to rise above Monte-Carlo noise,
/// so this check runs its own (eps, lambda, pprime_sigma).
struct ChaosOptions {
  std::vector<std::size_t> sizes{50, 200, 800};
  std::size_t seeds = 1000;
  std::size_t horizon = 5;
  double eps = 0.5;
  double lambda = 10.0;
  double pprime_sigma = 0.05;
};
CheckReport check_propagation_of_chaos(const Setup& s, const ChaosOptions& o = {});

struct TightnessOptions {
  double delta = 1e-3;
  std::size_t steps = 200;
  std::size_t scheme_agents = 100;
  std::size_t scheme_seeds = 20;
};
/// Radius r such that E widened by r is a valid K(delta) for every step of
/// the mean-field and scheme fields.
double tightness_radius(const Model& model, const InitialCondition& ic, double delta);
CheckReport check_tightness(const Setup& s, const TightnessOptions& o = {});

struct DeterminismOptions {
  std::size_t n_agents = 50;
  std::size_t horizon = 5;
  std::size_t parallel = 4;
};
CheckReport check_determinism(const Setup& s, const DeterminismOptions& o = {});

// --- registry and report ---

struct CheckInfo {
  std::string name;
  std::string summary;
  std::function<CheckReport(const Setup&)> run;
};

/// Every check with its default options, in run order.
const std::vector<CheckInfo>& check_catalog();
const CheckInfo& find_check(const std::string& name);

/// Runs one check and records its wall time.
CheckReport run_check(const CheckInfo& info, const Setup& s);

/// JSON summary: seed, config hash and one entry per check. Wall times are
/// left out so equal inputs give equal bytes.
nlohmann::json emit_report(const std::vector<CheckReport>& reports, std::uint64_t seed,
                           const std::string& config_hash);

}  // namespace agentfield
