#pragma once

#include <cstddef>
#include <span>
#include <variant>
#include <vector>

#include "agentfield/core.hpp"
#include "agentfield/geometry.hpp"
#include "agentfield/kernels.hpp"
#include "agentfield/measures.hpp"

namespace agentfield {

/// The potential Psi an agent reads: a grid field (multilinear interpolation)
/// or a Gaussian mixture (exact pointwise evaluation).
class PotentialField {
 public:
  explicit PotentialField(GridDensity grid) : rep_(std::move(grid)) {}
  explicit PotentialField(GaussianMixture mixture) : rep_(std::move(mixture)) {}

  [[nodiscard]] double operator()(const Point& x) const;
  [[nodiscard]] bool is_grid() const { return std::holds_alternative<GridDensity>(rep_); }
  [[nodiscard]] const GridDensity& grid() const { return std::get<GridDensity>(rep_); }
  [[nodiscard]] const GaussianMixture& mixture() const { return std::get<GaussianMixture>(rep_); }

  /// Psi at every centre of `e_grid`. A field grid aligned with the E grid is
  /// read directly, without interpolation.
  [[nodiscard]] std::vector<double> on_grid(const GridSpec& e_grid) const;

  /// sup - inf of Psi. Grid fields use their stored values; for a mixture the
  /// inf over R^d is 0 and the sup is bounded by the weighted peak sum.
  [[nodiscard]] double oscillation() const;

 private:
  std::variant<GridDensity, GaussianMixture> rep_;
};

/// exp(-lambda * (psi_x - psi_y)_+).
inline double accept_weight(double psi_x, double psi_y, double lambda) {
  const double up = psi_x - psi_y;
  return up > 0.0 ? std::exp(-lambda * up) : 1.0;
}

/// One draw from M^Psi(x, .): propose Y ~ Q(x, .), keep it with probability
/// accept_weight(Psi(x), Psi(Y)), otherwise return an independent draw from
/// Q0(x, .).
Point m_psi_sample(const Point& x, const PotentialField& psi, double lambda, const KernelBank& bank,
                   const BoxDomain& dom, Rng& rng);

/// Markov transition between the cells of a grid on E. Densities are carried
/// as point values at cell centres, so apply() maps m to mK.
class GridOperator {
 public:
  explicit GridOperator(GridSpec grid) : grid_(grid) {}
  virtual ~GridOperator() = default;

  [[nodiscard]] const GridSpec& grid() const { return grid_; }
  /// Density of mK.
  [[nodiscard]] virtual std::vector<double> apply(std::span<const double> m) const = 0;
  /// (Kf)(x_i) = sum_j K_ij f_j.
  [[nodiscard]] virtual std::vector<double> apply_function(std::span<const double> f) const = 0;
  /// Transition probabilities out of cell i.
  [[nodiscard]] std::vector<double> row(std::size_t i) const;

  [[nodiscard]] GridDensity push(const GridDensity& m) const;

 protected:
  GridSpec grid_;
};

/// Q on the cells of E: eps_q / n + (1 - eps_q) * product of per-axis
/// truncated-Gaussian cell probabilities from each cell centre.
class QGridOperator final : public GridOperator {
 public:
  QGridOperator(const GridSpec& e_grid, const KernelBank& bank);
  [[nodiscard]] std::vector<double> apply(std::span<const double> m) const override;
  [[nodiscard]] std::vector<double> apply_function(std::span<const double> f) const override;
  [[nodiscard]] double entry(std::size_t i, std::size_t j) const;
  [[nodiscard]] double eps_q() const { return eps_q_; }

 private:
  double eps_q_;
  std::array<std::vector<double>, kMaxDim> tables_;
};

class Q0GridOperator final : public GridOperator {
 public:
  Q0GridOperator(const GridSpec& e_grid, const KernelBank& bank);
  [[nodiscard]] std::vector<double> apply(std::span<const double> m) const override;
  [[nodiscard]] std::vector<double> apply_function(std::span<const double> f) const override;
  [[nodiscard]] double entry(std::size_t i, std::size_t j) const;

 private:
  bool uniform_;
  std::array<std::vector<double>, kMaxDim> tables_;
};

/// M^Psi on the cells of E. The acceptance normaliser of every row uses the
/// same cell quadrature as the transition itself, so rows sum to 1.
class MetropolisGridOperator final : public GridOperator {
 public:
  MetropolisGridOperator(const GridSpec& e_grid, std::vector<double> psi, double lambda,
                         const KernelBank& bank);
  [[nodiscard]] std::vector<double> apply(std::span<const double> m) const override;
  [[nodiscard]] std::vector<double> apply_function(std::span<const double> f) const override;
  /// Probability mass of the accepted-proposal branch out of cell i.
  [[nodiscard]] double acceptance(std::size_t i) const { return accept_mass_[i]; }

 private:
  [[nodiscard]] double accepted_entry(std::size_t i, std::size_t j) const;

  QGridOperator q_;
  Q0GridOperator q0_;
  std::vector<double> psi_;
  double lambda_;
  std::vector<double> accept_mass_;
  std::vector<double> dense_;  // accepted_entry cache, empty when the grid is large
};

/// Densest grid (cells^2 entries) for which M^Psi keeps a dense matrix.
inline constexpr std::size_t kDenseOperatorLimit = std::size_t{1} << 20;

/// m M^Psi on the grid of m.
GridDensity m_psi_pushforward(const GridDensity& m, const PotentialField& psi, double lambda,
                              const KernelBank& bank);

/// Lipschitz constant of x -> M^eta f(x) over ||f||_inf <= 1 when eta is
/// l_eta-Lipschitz: l_{Q,Q0} (3 + 2 lambda l_eta).
double m_psi_lipschitz_bound(const KernelBank& bank, double lambda, double l_eta);

}  // namespace agentfield
