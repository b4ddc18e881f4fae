#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "agentfield/geometry.hpp"
#include "agentfield/kernels.hpp"
#include "agentfield/measures.hpp"

namespace agentfield {

/// Gaussian convolution on a field grid, applied one axis at a time by
/// direct summation. Every source cell spreads its mass with weights
/// h * phi(y - x) renormalised to 1 over the grid, so the operator is an
/// exact Markov matrix; the mass that fell outside before renormalisation is
/// reported as leakage.
class FieldConvolver {
 public:
  FieldConvolver(const GridSpec& grid, double sigma);

  /// Convolved density values; `leaked` receives the mass that would have
  /// left the grid.
  [[nodiscard]] std::vector<double> apply(std::span<const double> density, double* leaked = nullptr) const;
  [[nodiscard]] const GridSpec& grid() const { return grid_; }
  [[nodiscard]] double sigma() const { return sigma_; }

 private:
  GridSpec grid_;
  double sigma_;
  std::array<std::vector<double>, kMaxDim> weights_;   // by cell offset, truncated
  std::array<std::vector<double>, kMaxDim> row_mass_;  // raw mass kept per source cell
};

/// Everything a deterministic or stochastic run shares: geometry, kernels,
/// grids, (eps, lambda) and the field convolvers.
class Model {
 public:
  Model(const BoxDomain& dom, const KernelParams& kernels, std::size_t cells_per_axis, double eps,
        double lambda);

  [[nodiscard]] const BoxDomain& domain() const { return dom_; }
  [[nodiscard]] const KernelBank& bank() const { return bank_; }
  [[nodiscard]] const GridSpec& e_grid() const { return e_grid_; }
  [[nodiscard]] const GridSpec& field_grid() const { return field_grid_; }
  [[nodiscard]] double eps() const { return eps_; }
  [[nodiscard]] double lambda() const { return lambda_; }
  [[nodiscard]] const FieldConvolver& p_convolver() const { return p_conv_; }
  [[nodiscard]] const FieldConvolver& pprime_convolver() const { return pprime_conv_; }
  /// Field-grid index of every E cell.
  [[nodiscard]] const std::vector<std::size_t>& e_in_field() const { return e_in_field_; }

  /// Copy of this model with different (eps, lambda).
  [[nodiscard]] Model with(double eps, double lambda) const;

 private:
  BoxDomain dom_;
  KernelBank bank_;
  GridSpec e_grid_;
  GridSpec field_grid_;
  double eps_;
  double lambda_;
  FieldConvolver p_conv_;
  FieldConvolver pprime_conv_;
  std::vector<std::size_t> e_in_field_;
};

struct FieldUpdate {
  GridDensity eta;
  double leaked_mass = 0.0;
};

/// eta R_m = (1 - eps) eta P + eps m P' on the field grid, renormalised.
FieldUpdate field_update(const GridDensity& eta, const GridDensity& m, const Model& model);
/// Same with an empirical m; the P' term is (eps / N) sum_j P'(X_j, .) at
/// cell centres.
FieldUpdate field_update(const GridDensity& eta, const EmpiricalMeasure& m, const Model& model);

/// (m_n, eta_n): m on the E grid, eta on the field grid.
struct MeanFieldState {
  GridDensity m;
  GridDensity eta;
  std::size_t step = 0;
};

/// Simultaneous update (m M^eta, eta R_m).
MeanFieldState phi_step(const MeanFieldState& s, const Model& model);

/// ||(m, eta) - (m', eta')|| = tv(m, m') + tv(eta, eta').
double pair_distance(const MeanFieldState& a, const MeanFieldState& b);

struct ContractionConstants {
  bool feasible = false;
  double theta = 1.0;  // smallest theta in (0, 1) meeting the threshold inequality
  double kappa = 0.0;  // 4 lambda M_{P,P'} / theta
  double s = 1.0;      // sup(1 - eps, 1 - eps_q e^{-lambda M} + eps beta)
  double eps0 = 0.0;     // upper end of the feasible eps interval at this lambda
  double eps_min = 0.0;  // lower end of the feasible eps interval at this lambda
  double lambda0 = 0.0;  // upper end of the feasible lambda interval at this eps
  double eps = 0.0;
  double lambda = 0.0;
  double eps_q = 0.0;
  double beta_pprime = 0.0;
  double m_p_pprime = 0.0;
};

/// theta solves theta^2 = s theta + 4 lambda M; feasible iff theta < 1, i.e.
/// s + 4 lambda M < 1. The eps and lambda boundaries are located by bisection.
ContractionConstants compute_constants(double eps, double lambda, const KernelBank& bank);

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_error)
      : std::runtime_error(what), last_error_(last_error) {}
  [[nodiscard]] double last_error() const { return last_error_; }

 private:
  double last_error_;
};

struct FixedPointResult {
  MeanFieldState state;
  std::vector<double> trace;  // alpha_k = ||x_k - x_{k+1}||
  std::size_t iterations = 0;
};

inline constexpr double kDefaultFixedPointTol = 1e-8;
inline constexpr std::size_t kDefaultFixedPointMaxIter = 10000;

/// Iterates phi_step until alpha_k < tol. Throws ConvergenceError after
/// max_iter steps.
FixedPointResult fixed_point(const MeanFieldState& initial, const Model& model,
                             double tol = kDefaultFixedPointTol,
                             std::size_t max_iter = kDefaultFixedPointMaxIter);

/// Embeds a density on the E grid into the field grid (zero outside E).
GridDensity embed_in_field(const GridDensity& m, const Model& model);

/// Exact field update of a mixture field against an empirical measure: every
/// component is widened by P and scaled by (1 - eps), and each agent adds a
/// P' component of weight eps / N. Zero-weight blocks are omitted.
GaussianMixture mixture_field_update(const GaussianMixture& eta, const EmpiricalMeasure& m,
                                     const Model& model);

/// m0 is N(center, sigma^2 I) truncated to E (uniform on E when sigma <= 0);
/// eta0 is N(center, sigma^2 I) on R^d.
struct InitialCondition {
  Point m0_center{0.3, 0.3, 0.3};
  double m0_sigma = 0.1;
  Point eta0_center{0.7, 0.7, 0.7};
  double eta0_sigma = 0.1;
};

GridDensity initial_m(const InitialCondition& ic, const Model& model);
GaussianMixture initial_eta_mixture(const InitialCondition& ic, const Model& model);
GridDensity initial_eta(const InitialCondition& ic, const Model& model);
MeanFieldState initial_state(const InitialCondition& ic, const Model& model);
Point sample_m0(const InitialCondition& ic, const Model& model, Rng& rng);

/// Mean-field trajectory (m_0, eta_0), ..., (m_n, eta_n).
std::vector<MeanFieldState> meanfield_trajectory(const MeanFieldState& initial, const Model& model,
                                                 std::size_t horizon);

}  // namespace agentfield
