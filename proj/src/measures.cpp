#include "agentfield/measures.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <random>

#include "agentfield/normal.hpp"

namespace agentfield {

namespace {

void require_same_grid(const GridDensity& mu, const GridDensity& nu, const char* what) {
  if (!(mu.spec() == nu.spec())) throw DomainError(std::string(what) + ": mismatched grids");
}

}  // namespace

GridDensity::GridDensity(GridSpec spec, std::vector<double> values, Support support)
    : spec_(spec), values_(std::move(values)), support_(support) {
  if (values_.size() != spec_.size()) throw DomainError("GridDensity: value count does not match grid");
}

GridDensity GridDensity::zeros(const GridSpec& spec, Support support) {
  return {spec, std::vector<double>(spec.size(), 0.0), support};
}

GridDensity GridDensity::uniform(const GridSpec& spec, Support support) {
  const double total = static_cast<double>(spec.size()) * spec.cell_volume();
  return {spec, std::vector<double>(spec.size(), 1.0 / total), support};
}

double GridDensity::mass() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s * spec_.cell_volume();
}

double GridDensity::normalize() {
  const double m = mass();
  if (!(m > 0.0)) throw DomainError("GridDensity::normalize: zero mass");
  for (double& v : values_) v /= m;
  return m;
}

void GaussianMixture::validate(double tolerance) const {
  double total = 0.0;
  for (const auto& c : components) {
    if (!(c.weight > 0.0)) throw DomainError("GaussianMixture: nonpositive weight");
    if (!(c.sigma > 0.0)) throw DomainError("GaussianMixture: nonpositive sigma");
    total += c.weight;
  }
  if (std::abs(total - 1.0) > tolerance) throw DomainError("GaussianMixture: weights do not sum to 1");
}

double tv_distance(const GridDensity& mu, const GridDensity& nu) {
  require_same_grid(mu, nu, "tv_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s += std::abs(mu[i] - nu[i]);
  return s * mu.spec().cell_volume();
}

double sup_distance(const GridDensity& mu, const GridDensity& nu) {
  require_same_grid(mu, nu, "sup_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) s = std::max(s, std::abs(mu[i] - nu[i]));
  return s;
}

double oscillation(const GridDensity& eta) {
  if (eta.size() == 0) return 0.0;
  const auto [lo, hi] = std::minmax_element(eta.values().begin(), eta.values().end());
  return *hi - *lo;
}

double mixture_eval(const GaussianMixture& mix, const Point& y) {
  double s = 0.0;
  for (const auto& c : mix.components) {
    s += c.weight * normal::iso_pdf(mix.dim, squared_distance(c.mean, y), c.sigma);
  }
  return s;
}

MixtureSampler::MixtureSampler(const GaussianMixture& mix) : mix_(&mix) {
  if (mix.components.empty()) throw DomainError("MixtureSampler: empty mixture");
  cumulative_.reserve(mix.components.size());
  double acc = 0.0;
  for (const auto& c : mix.components) cumulative_.push_back(acc += c.weight);
}

Point MixtureSampler::operator()(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double t = u(rng) * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), t);
  if (it == cumulative_.end()) --it;
  const auto& c = mix_->components[static_cast<std::size_t>(it - cumulative_.begin())];
  std::normal_distribution<double> gauss(0.0, 1.0);
  Point y{};
  for (std::size_t a = 0; a < mix_->dim; ++a) y[a] = c.mean[a] + c.sigma * gauss(rng);
  return y;
}

Point mixture_sample(const GaussianMixture& mix, Rng& rng) { return MixtureSampler(mix)(rng); }

Rasterized rasterize(const GaussianMixture& mix, const GridSpec& spec, Support support) {
  // The density factorises per axis for each component, so tabulate the
  // per-axis factors once per component.
  const std::size_t d = spec.dim;
  std::vector<double> values(spec.size(), 0.0);
  std::array<std::vector<double>, kMaxDim> axis;
  for (const auto& c : mix.components) {
    for (std::size_t a = 0; a < d; ++a) {
      axis[a].resize(spec.cells[a]);
      for (std::size_t i = 0; i < spec.cells[a]; ++i) {
        axis[a][i] = normal::pdf((spec.center_coord(a, i) - c.mean[a]) / c.sigma) / c.sigma;
      }
    }
    for (std::size_t flat = 0; flat < values.size(); ++flat) {
      const Index idx = spec.unflatten(flat);
      double v = c.weight;
      for (std::size_t a = 0; a < d; ++a) v *= axis[a][idx[a]];
      values[flat] += v;
    }
  }
  Rasterized out{GridDensity(spec, std::move(values), support), 0.0};
  out.leaked_mass = 1.0 - out.density.normalize();
  return out;
}

GaussianMixture single_gaussian(std::size_t dim, const Point& mean, double sigma) {
  return GaussianMixture{dim, {{1.0, mean, sigma}}};
}

// --- function nets ---

FunctionNet::FunctionNet(BoxDomain box, double a, double b, double delta, Index nodes, Point mesh,
                         std::vector<double> values)
    : box_(box), a_(a), b_(b), delta_(delta), nodes_(nodes), mesh_(mesh), values_(std::move(values)) {
  node_count_ = 1;
  for (std::size_t i = 0; i < box_.dim; ++i) node_count_ *= nodes_[i];
  count_ = node_count_ == 0 ? 0 : values_.size() / node_count_;
}

void FunctionNet::add_hat_weights(const Point& x, double weight, std::vector<double>& w) const {
  const std::size_t d = box_.dim;
  Index base{};
  std::array<double, kMaxDim> frac{};
  for (std::size_t a = 0; a < d; ++a) {
    const double u = std::clamp((x[a] - box_.lower[a]) / mesh_[a], 0.0,
                                static_cast<double>(nodes_[a] - 1));
    const double f = std::min(std::floor(u), static_cast<double>(nodes_[a] - 2));
    base[a] = static_cast<std::size_t>(std::max(f, 0.0));
    frac[a] = nodes_[a] == 1 ? 0.0 : u - static_cast<double>(base[a]);
  }
  const std::size_t corners = std::size_t{1} << d;
  for (std::size_t c = 0; c < corners; ++c) {
    double h = weight;
    std::size_t flat = 0;
    for (std::size_t a = 0; a < d; ++a) {
      const bool up = (c >> a) & 1U;
      if (nodes_[a] == 1 && up) { h = 0.0; break; }
      h *= up ? frac[a] : 1.0 - frac[a];
      flat = flat * nodes_[a] + base[a] + (up ? 1 : 0);
    }
    if (h != 0.0) w[flat] += h;
  }
}

double FunctionNet::eval(std::size_t k, const Point& x) const {
  std::vector<double> w(node_count_, 0.0);
  add_hat_weights(x, 1.0, w);
  const auto g = member(k);
  double s = 0.0;
  for (std::size_t n = 0; n < node_count_; ++n) s += w[n] * g[n];
  return s;
}

std::vector<double> FunctionNet::node_weights(std::span<const Point> points,
                                              std::span<const double> weights) const {
  std::vector<double> w(node_count_, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i) add_hat_weights(points[i], weights[i], w);
  return w;
}

std::vector<double> FunctionNet::node_weights(const EmpiricalMeasure& mu) const {
  std::vector<double> w(node_count_, 0.0);
  if (mu.points.empty()) return w;
  const double each = 1.0 / static_cast<double>(mu.points.size());
  for (const Point& p : mu.points) add_hat_weights(p, each, w);
  return w;
}

std::vector<double> FunctionNet::node_weights(const GridDensity& mu) const {
  std::vector<double> w(node_count_, 0.0);
  const double vol = mu.spec().cell_volume();
  for (std::size_t i = 0; i < mu.size(); ++i) {
    if (mu[i] != 0.0) add_hat_weights(mu.spec().center(i), mu[i] * vol, w);
  }
  return w;
}

double FunctionNet::max_abs_pairing(std::span<const double> w) const {
  double best = 0.0;
  for (std::size_t k = 0; k < count_; ++k) {
    const double* g = values_.data() + k * node_count_;
    double s = 0.0;
    for (std::size_t n = 0; n < node_count_; ++n) s += w[n] * g[n];
    best = std::max(best, std::abs(s));
  }
  return best;
}

namespace {

struct NetBuilder {
  std::size_t dim;
  Index nodes;
  Point mesh;
  double b;
  std::vector<double> levels;
  std::size_t node_count;
  std::size_t cap;
  std::vector<double> current;
  std::vector<double> out;
  std::size_t members = 0;

  [[nodiscard]] Index unflatten(std::size_t flat) const {
    Index idx{};
    for (std::size_t a = dim; a-- > 0;) {
      idx[a] = flat % nodes[a];
      flat /= nodes[a];
    }
    return idx;
  }

  [[nodiscard]] std::size_t stride(std::size_t axis) const {
    std::size_t s = 1;
    for (std::size_t a = axis + 1; a < dim; ++a) s *= nodes[a];
    return s;
  }

  // The gradient of a multilinear function on a cell is largest in norm at a
  // vertex, where each component is the difference quotient of the incident
  // edge along that axis.
  [[nodiscard]] bool cell_ok(std::size_t top) const {
    const std::size_t corners = std::size_t{1} << dim;
    for (std::size_t c = 0; c < corners; ++c) {
      std::size_t vertex = top;
      for (std::size_t a = 0; a < dim; ++a) {
        if (!((c >> a) & 1U)) vertex -= stride(a);
      }
      double norm2 = 0.0;
      for (std::size_t a = 0; a < dim; ++a) {
        const bool up = (c >> a) & 1U;
        const std::size_t lo_node = up ? vertex - stride(a) : vertex;
        const double g = (current[lo_node + stride(a)] - current[lo_node]) / mesh[a];
        norm2 += g * g;
      }
      if (std::sqrt(norm2) > b * (1.0 + 1e-9) + 1e-12) return false;
    }
    return true;
  }

  [[nodiscard]] bool consistent(std::size_t n) const {
    const Index idx = unflatten(n);
    for (std::size_t a = 0; a < dim; ++a) {
      if (idx[a] == 0) continue;
      const double g = std::abs(current[n] - current[n - stride(a)]) / mesh[a];
      if (g > b * (1.0 + 1e-9) + 1e-12) return false;
    }
    if (dim > 1) {
      for (std::size_t a = 0; a < dim; ++a) {
        if (idx[a] == 0) return true;
      }
      return cell_ok(n);
    }
    return true;
  }

  void descend(std::size_t n) {
    if (n == node_count) {
      if (++members > cap) {
        throw CapacityError("build_net: net exceeds " + std::to_string(cap) + " members");
      }
      out.insert(out.end(), current.begin(), current.end());
      return;
    }
    for (double v : levels) {
      current[n] = v;
      if (consistent(n)) descend(n + 1);
    }
  }
};

}  // namespace

FunctionNet build_net(double a, double b, double delta, const BoxDomain& k, std::size_t cap) {
  if (!(a > 0.0) || !(b > 0.0) || !(delta > 0.0)) {
    throw ConfigError("build_net: a, b and delta must be positive");
  }
  NetBuilder nb;
  nb.dim = k.dim;
  nb.b = b;
  nb.cap = cap;
  nb.node_count = 1;
  for (std::size_t ax = 0; ax < k.dim; ++ax) {
    const auto intervals =
        static_cast<std::size_t>(std::max(1.0, std::ceil(k.width(ax) * b / delta - 1e-9)));
    nb.nodes[ax] = intervals + 1;
    nb.mesh[ax] = k.width(ax) / static_cast<double>(intervals);
    nb.node_count *= nb.nodes[ax];
  }
  const auto top = static_cast<long>(std::ceil(a / delta - 1e-9));
  for (long i = -top; i <= top; ++i) {
    const double v = std::clamp(static_cast<double>(i) * delta, -a, a);
    if (nb.levels.empty() || v > nb.levels.back()) nb.levels.push_back(v);
  }
  nb.current.assign(nb.node_count, 0.0);
  nb.descend(0);
  return FunctionNet(k, a, b, delta, nb.nodes, nb.mesh, std::move(nb.out));
}

namespace {

double pairing_gap(std::vector<double> wa, const std::vector<double>& wb, const FunctionNet& net) {
  for (std::size_t i = 0; i < wa.size(); ++i) wa[i] -= wb[i];
  return net.max_abs_pairing(wa);
}

}  // namespace

double net_distance(const EmpiricalMeasure& mu, const EmpiricalMeasure& nu, const FunctionNet& net) {
  return pairing_gap(net.node_weights(mu), net.node_weights(nu), net);
}
double net_distance(const EmpiricalMeasure& mu, const GridDensity& nu, const FunctionNet& net) {
  return pairing_gap(net.node_weights(mu), net.node_weights(nu), net);
}
double net_distance(const GridDensity& mu, const EmpiricalMeasure& nu, const FunctionNet& net) {
  return pairing_gap(net.node_weights(mu), net.node_weights(nu), net);
}
double net_distance(const GridDensity& mu, const GridDensity& nu, const FunctionNet& net) {
  return pairing_gap(net.node_weights(mu), net.node_weights(nu), net);
}

// --- serialisation ---

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

void write_csv(std::ostream& os, const GridDensity& g) {
  const GridSpec& s = g.spec();
  os << "cell";
  for (std::size_t a = 0; a < s.dim; ++a) os << ",x" << a;
  os << ",density\n";
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point c = s.center(i);
    os << i;
    for (std::size_t a = 0; a < s.dim; ++a) os << ',' << format_double(c[a]);
    os << ',' << format_double(g[i]) << '\n';
  }
}

void write_csv(std::ostream& os, const EmpiricalMeasure& m) {
  os << "agent";
  for (std::size_t a = 0; a < m.dim; ++a) os << ",x" << a;
  os << '\n';
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    os << i;
    for (std::size_t a = 0; a < m.dim; ++a) os << ',' << format_double(m.points[i][a]);
    os << '\n';
  }
}

nlohmann::json to_json(const GaussianMixture& mix) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : mix.components) {
    nlohmann::json mean = nlohmann::json::array();
    for (std::size_t a = 0; a < mix.dim; ++a) mean.push_back(c.mean[a]);
    comps.push_back({{"weight", c.weight}, {"mean", mean}, {"sigma", c.sigma}});
  }
  return {{"dim", mix.dim}, {"components", comps}};
}

GaussianMixture mixture_from_json(const nlohmann::json& j) {
  GaussianMixture mix;
  mix.dim = j.at("dim").get<std::size_t>();
  if (mix.dim == 0 || mix.dim > kMaxDim) throw ConfigError("mixture: bad dim");
  for (const auto& c : j.at("components")) {
    GaussianMixture::Component comp;
    comp.weight = c.at("weight").get<double>();
    comp.sigma = c.at("sigma").get<double>();
    const auto& mean = c.at("mean");
    if (mean.size() != mix.dim) throw ConfigError("mixture: mean has wrong length");
    for (std::size_t a = 0; a < mix.dim; ++a) comp.mean[a] = mean[a].get<double>();
    mix.components.push_back(comp);
  }
  return mix;
}

}  // namespace agentfield
