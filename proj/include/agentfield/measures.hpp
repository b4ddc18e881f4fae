#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentfield/core.hpp"
#include "agentfield/geometry.hpp"

namespace agentfield {

/// Nonnegative density on a regular grid (point values at cell centres).
class GridDensity {
 public:
  GridDensity() = default;
  GridDensity(GridSpec spec, std::vector<double> values, Support support);

  /// All-zero density on `spec`.
  static GridDensity zeros(const GridSpec& spec, Support support);
  /// Constant density with unit mass on `spec`.
  static GridDensity uniform(const GridSpec& spec, Support support);

  [[nodiscard]] const GridSpec& spec() const { return spec_; }
  [[nodiscard]] Support support() const { return support_; }
  [[nodiscard]] std::span<const double> values() const { return values_; }
  [[nodiscard]] std::span<double> values() { return values_; }
  [[nodiscard]] std::size_t size() const { return values_.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return values_[i]; }

  [[nodiscard]] double mass() const;
  /// Rescales to unit mass and returns the mass before rescaling.
  double normalize();
  /// Multilinear interpolation at x.
  [[nodiscard]] double at(const Point& x) const { return spec_.interpolate(values_, x); }
  /// Midpoint-rule integral of f against the density.
  template <class F>
  [[nodiscard]] double integrate(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < values_.size(); ++i) acc += values_[i] * f(spec_.center(i));
    return acc * spec_.cell_volume();
  }

 private:
  GridSpec spec_;
  std::vector<double> values_;
  Support support_ = Support::E;
};

/// N equally weighted points.
struct EmpiricalMeasure {
  std::size_t dim = 1;
  std::vector<Point> points;

  [[nodiscard]] std::size_t size() const { return points.size(); }
  template <class F>
  [[nodiscard]] double integrate(F&& f) const {
    double acc = 0.0;
    for (const Point& p : points) acc += f(p);
    return points.empty() ? 0.0 : acc / static_cast<double>(points.size());
  }
};

/// Weighted isotropic Gaussian components on R^d.
struct GaussianMixture {
  struct Component {
    double weight = 0.0;
    Point mean{};
    double sigma = 1.0;
  };
  std::size_t dim = 1;
  std::vector<Component> components;

  /// Throws DomainError unless weights are positive and sum to 1 and sigmas are positive.
  void validate(double tolerance = 1e-12) const;
};

// --- distances between grid densities ---

/// Total variation under the sup_{|f|<=1} |mu(f)| convention: the integral
/// of |mu - nu|, which is 2 for mutually singular probability measures.
double tv_distance(const GridDensity& mu, const GridDensity& nu);
double sup_distance(const GridDensity& mu, const GridDensity& nu);
double oscillation(const GridDensity& eta);

// --- Gaussian mixtures ---

double mixture_eval(const GaussianMixture& mix, const Point& y);

/// Categorical-then-Gaussian draws; caches the cumulative weights.
class MixtureSampler {
 public:
  explicit MixtureSampler(const GaussianMixture& mix);
  Point operator()(Rng& rng) const;

 private:
  const GaussianMixture* mix_;
  std::vector<double> cumulative_;
};

Point mixture_sample(const GaussianMixture& mix, Rng& rng);

struct Rasterized {
  GridDensity density;
  double leaked_mass = 0.0;  // 1 - midpoint mass on the grid before renormalisation
};

/// Evaluates the mixture at cell centres and renormalises to unit mass.
Rasterized rasterize(const GaussianMixture& mix, const GridSpec& spec, Support support);

/// A single isotropic Gaussian component of unit weight.
GaussianMixture single_gaussian(std::size_t dim, const Point& mean, double sigma);

// --- function nets ---

/// Finite family of piecewise-multilinear functions on a box K with sup norm
/// <= a and Lipschitz constant <= b, forming a delta-cover of all such
/// functions. Node values are multiples of delta clipped to [-a, a] on a
/// lattice of mesh at most delta / b.
class FunctionNet {
 public:
  FunctionNet(BoxDomain box, double a, double b, double delta, Index nodes, Point mesh,
              std::vector<double> values);

  [[nodiscard]] std::size_t size() const { return count_; }
  [[nodiscard]] std::size_t node_count() const { return node_count_; }
  [[nodiscard]] double bound() const { return a_; }
  [[nodiscard]] double lipschitz() const { return b_; }
  [[nodiscard]] double delta() const { return delta_; }
  [[nodiscard]] const Point& mesh() const { return mesh_; }
  [[nodiscard]] std::span<const double> member(std::size_t k) const {
    return {values_.data() + k * node_count_, node_count_};
  }
  /// Value of member k at x (coordinates clamped into K).
  [[nodiscard]] double eval(std::size_t k, const Point& x) const;

  /// Vector w with <mu, g_k> = sum_n w[n] * member(k)[n] for every member.
  [[nodiscard]] std::vector<double> node_weights(std::span<const Point> points,
                                                 std::span<const double> weights) const;
  [[nodiscard]] std::vector<double> node_weights(const EmpiricalMeasure& mu) const;
  [[nodiscard]] std::vector<double> node_weights(const GridDensity& mu) const;

  /// max_k |sum_n w[n] g_k[n]|.
  [[nodiscard]] double max_abs_pairing(std::span<const double> w) const;

 private:
  void add_hat_weights(const Point& x, double weight, std::vector<double>& w) const;

  BoxDomain box_;
  double a_, b_, delta_;
  Index nodes_;
  Point mesh_;
  std::size_t node_count_;
  std::size_t count_;
  std::vector<double> values_;
};

inline constexpr std::size_t kDefaultNetCap = 20000;

/// Enumerates the net; throws CapacityError past `cap` members.
FunctionNet build_net(double a, double b, double delta, const BoxDomain& k,
                      std::size_t cap = kDefaultNetCap);

double net_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const FunctionNet& net);
double net_distance(const EmpiricalMeasure& mu, const GridDensity& nu, const FunctionNet& net);
double net_distance(const GridDensity& mu, const EmpiricalMeasure& nu, const FunctionNet& net);
double net_distance(const GridDensity& mu, const GridDensity& nu, const FunctionNet& net);

// --- serialisation ---

void write_csv(std::ostream& os, const GridDensity& g);
void write_csv(std::ostream& os, const EmpiricalMeasure& m);
nlohmann::json to_json(const GaussianMixture& mix);
GaussianMixture mixture_from_json(const nlohmann::json& j);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

}  // namespace agentfield
