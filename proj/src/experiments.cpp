#include "agentfield/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include <boost/math/distributions/students_t.hpp>

#include "agentfield/agents.hpp"
#include "agentfield/metropolis.hpp"
#include "agentfield/normal.hpp"
#include "agentfield/parallel.hpp"
#include "agentfield/scheme.hpp"

namespace agentfield {

using nlohmann::json;

std::uint64_t check_seed(std::uint64_t seed, const std::string& name) {
  return derive_seed(seed, kTagExperiment, fnv1a64(name));
}

// ---------------------------------------------------------------------------
// random inputs

GridDensity random_density(const GridSpec& spec, Support support, Rng& rng) {
  std::uniform_int_distribution<int> kind(0, 2);
  std::exponential_distribution<double> ex(1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(spec.size(), 0.0);
  switch (kind(rng)) {
    case 0:
      for (double& x : v) x = ex(rng);
      break;
    case 1: {
      GaussianMixture mix;
      mix.dim = spec.dim;
      const int comps = std::uniform_int_distribution<int>(1, 3)(rng);
      double total = 0.0;
      for (int c = 0; c < comps; ++c) {
        GaussianMixture::Component comp;
        for (std::size_t a = 0; a < spec.dim; ++a) comp.mean[a] = spec.origin[a] + u(rng) * (spec.upper(a) - spec.origin[a]);
        comp.sigma = (0.03 + 0.27 * u(rng)) * (spec.upper(0) - spec.origin[0]);
        comp.weight = ex(rng) + 1e-3;
        total += comp.weight;
        mix.components.push_back(comp);
      }
      for (auto& c : mix.components) c.weight /= total;
      return rasterize(mix, spec, support).density;
    }
    default: {
      const int cells = std::uniform_int_distribution<int>(1, 4)(rng);
      std::uniform_int_distribution<std::size_t> pick(0, spec.size() - 1);
      for (int c = 0; c < cells; ++c) v[pick(rng)] += ex(rng) + 1e-3;
      break;
    }
  }
  GridDensity g(spec, std::move(v), support);
  g.normalize();
  return g;
}

GridDensity random_field(const Model& model, Rng& rng, double min_sigma, double max_sigma) {
  const BoxDomain& dom = model.domain();
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::exponential_distribution<double> ex(1.0);
  GaussianMixture mix;
  mix.dim = dom.dim;
  const int comps = std::uniform_int_distribution<int>(1, 4)(rng);
  double total = 0.0;
  for (int c = 0; c < comps; ++c) {
    GaussianMixture::Component comp;
    for (std::size_t a = 0; a < dom.dim; ++a) {
      comp.mean[a] = dom.lower[a] - 0.25 * dom.width(a) + u(rng) * 1.5 * dom.width(a);
    }
    comp.sigma = min_sigma + (max_sigma - min_sigma) * u(rng);
    comp.weight = ex(rng) + 1e-3;
    total += comp.weight;
    mix.components.push_back(comp);
  }
  for (auto& c : mix.components) c.weight /= total;
  return rasterize(mix, model.field_grid(), Support::FieldBox).density;
}

MeanFieldState random_state(const Model& model, Rng& rng) {
  GridDensity m = random_density(model.e_grid(), Support::E, rng);
  GridDensity eta = random_field(model, rng);
  return {std::move(m), std::move(eta), 0};
}

// ---------------------------------------------------------------------------
// statistics

MeanSe mean_se(const std::vector<double>& xs) {
  MeanSe r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return r;
  double var = 0.0;
  for (double x : xs) var += (x - r.mean) * (x - r.mean);
  var /= static_cast<double>(xs.size() - 1);
  r.se = std::sqrt(var / static_cast<double>(xs.size()));
  return r;
}

double ls_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

double one_sided_p(const std::vector<double>& xs) {
  const MeanSe m = mean_se(xs);
  if (xs.size() < 2) return 1.0;
  if (m.se == 0.0) return m.mean > 0.0 ? 0.0 : 1.0;
  const boost::math::students_t dist(static_cast<double>(xs.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, m.mean / m.se));
}

namespace {

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (!(v[i] < v[i - 1])) return false;
  }
  return true;
}

std::vector<double> log_of(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::log(x); });
  return out;
}

template <class T>
std::vector<double> as_doubles(const std::vector<T>& v) {
  return {v.begin(), v.end()};
}

Rng replica_stream(std::uint64_t master, std::uint64_t group, std::uint64_t r) {
  return make_stream(derive_seed(master, kTagReplica, group), kTagReplica, r);
}

std::uint64_t replica_seed(std::uint64_t master, std::uint64_t r) {
  return derive_seed(master, kTagReplica, r);
}

SystemOptions run_options(std::size_t n, std::size_t horizon, std::uint64_t seed,
                          std::vector<std::size_t> snaps) {
  SystemOptions o;
  o.n_agents = n;
  o.horizon = horizon;
  o.seed = seed;
  o.threads = 1;
  o.snapshot_steps = std::move(snaps);
  return o;
}

GridDensity raster(const GaussianMixture& mix, const Model& model) {
  return rasterize(mix, model.field_grid(), Support::FieldBox).density;
}

json constants_json(const ContractionConstants& c) {
  return {{"feasible", c.feasible}, {"theta", c.theta},   {"kappa", c.kappa},
          {"s", c.s},               {"eps0", c.eps0},     {"eps_min", c.eps_min},
          {"lambda0", c.lambda0},   {"eps", c.eps},       {"lambda", c.lambda},
          {"eps_q", c.eps_q},       {"beta_pprime", c.beta_pprime}, {"m_p_pprime", c.m_p_pprime}};
}

// Mean error per system size, its trend and the per-seed values.
struct Trend {
  std::vector<double> mean, se, net_mean, field_mean;
  double slope = 0.0;
  bool decreasing = false;
  bool passed = false;
};

template <class ErrorFn>
Trend size_trend(const Setup& s, std::uint64_t master, const FiniteHorizonOptions& o, ErrorFn&& err,
                 Table& per_seed) {
  Trend t;
  per_seed.columns = {"N", "seed", "net", "field", "error"};
  for (std::size_t i = 0; i < o.sizes.size(); ++i) {
    const std::size_t n = o.sizes[i];
    std::vector<double> net(o.seeds), field(o.seeds), total(o.seeds);
    parallel_for(o.seeds, s.threads, [&](std::size_t r) {
      const auto [a, b] = err(n, replica_seed(master, r));
      net[r] = a;
      field[r] = b;
      total[r] = a + b;
    });
    for (std::size_t r = 0; r < o.seeds; ++r) {
      per_seed.rows.push_back({static_cast<double>(n), static_cast<double>(r), net[r], field[r], total[r]});
    }
    const MeanSe m = mean_se(total);
    t.mean.push_back(m.mean);
    t.se.push_back(m.se);
    t.net_mean.push_back(mean_se(net).mean);
    t.field_mean.push_back(mean_se(field).mean);
  }
  t.decreasing = strictly_decreasing(t.mean);
  t.slope = ls_slope(log_of(as_doubles(o.sizes)), log_of(t.mean));
  t.passed = t.decreasing && t.slope <= o.max_slope;
  return t;
}

json trend_json(const Trend& t, const std::vector<std::size_t>& sizes, double max_slope) {
  return {{"N", sizes},          {"mean_error", t.mean},        {"std_error", t.se},
          {"net_mean", t.net_mean}, {"field_mean", t.field_mean}, {"log_log_slope", t.slope},
          {"max_slope", max_slope}, {"strictly_decreasing", t.decreasing}};
}

// Mass of N(mean, sigma^2 I) outside the box [lo, hi].
double gaussian_outside(const Point& mean, double sigma, const Point& lo, const Point& hi, std::size_t dim) {
  double inside = 1.0;
  for (std::size_t a = 0; a < dim; ++a) {
    inside *= normal::interval((lo[a] - mean[a]) / sigma, (hi[a] - mean[a]) / sigma);
  }
  return std::max(0.0, 1.0 - inside);
}

double mixture_outside(const GaussianMixture& mix, const Point& lo, const Point& hi) {
  double s = 0.0;
  for (const auto& c : mix.components) s += c.weight * gaussian_outside(c.mean, c.sigma, lo, hi, mix.dim);
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// checks

CheckReport check_mc_bound(const Setup& s, const McBoundOptions& o) {
  CheckReport rep;
  rep.name = "mc-bound";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  const GridDensity m0 = initial_m(s.ic, s.model);
  const double delta = s.net.delta();
  Table per_rep{{"N", "rep", "error"}, {}};
  Table summary{{"N", "mean", "std_error", "bound"}, {}};
  std::vector<double> means, ses, bounds, scaled;
  rep.passed = true;
  for (std::size_t i = 0; i < o.sizes.size(); ++i) {
    const std::size_t n = o.sizes[i];
    std::vector<double> errs(o.reps);
    parallel_for(o.reps, s.threads, [&](std::size_t r) {
      Rng rng = replica_stream(master, i, r);
      EmpiricalMeasure emp{s.model.domain().dim, std::vector<Point>(n)};
      for (Point& p : emp.points) p = sample_m0(s.ic, s.model, rng);
      errs[r] = net_distance(emp, m0, s.net);
    });
    for (std::size_t r = 0; r < o.reps; ++r) {
      per_rep.rows.push_back({static_cast<double>(n), static_cast<double>(r), errs[r]});
    }
    const MeanSe m = mean_se(errs);
    const double bound = 2.0 / std::sqrt(static_cast<double>(n)) + 2.0 * delta;
    rep.passed = rep.passed && m.mean <= bound;
    means.push_back(m.mean);
    ses.push_back(m.se);
    bounds.push_back(bound);
    scaled.push_back(m.mean * std::sqrt(static_cast<double>(n)));
    summary.rows.push_back({static_cast<double>(n), m.mean, m.se, bound});
  }
  std::vector<double> halving;
  for (std::size_t i = 0; i + 1 < o.sizes.size(); ++i) {
    if (o.sizes[i + 1] == 4 * o.sizes[i]) halving.push_back(means[i + 1] / means[i]);
  }
  rep.metrics = {{"N", o.sizes},       {"reps", o.reps},          {"net_delta", delta},
                 {"net_size", s.net.size()}, {"mean_error", means}, {"std_error", ses},
                 {"bound", bounds},     {"sqrt_n_times_mean", scaled},
                 {"quadrupling_ratio", halving}};
  rep.tables = {{"errors", per_rep}, {"summary", summary}};
  return rep;
}

CheckReport check_dobrushin(const Setup& s, const DobrushinOptions& o) {
  CheckReport rep;
  rep.name = "dobrushin";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  const GridSpec& grid = s.model.e_grid();
  Table t{{"eps_q", "pair", "tv_before", "tv_after", "ratio"}, {}};
  std::vector<double> max_ratio, bound;
  rep.passed = true;
  for (std::size_t e = 0; e < o.eps_q.size(); ++e) {
    KernelParams kp = s.model.bank().params;
    kp.eps_q = o.eps_q[e];
    const KernelBank bank = derive_constants(kp, s.model.domain());
    const QGridOperator q(grid, bank);
    std::vector<double> before(o.pairs), after(o.pairs);
    parallel_for(o.pairs, s.threads, [&](std::size_t r) {
      Rng rng = replica_stream(master, e, r);
      const GridDensity mu = random_density(grid, Support::E, rng);
      const GridDensity nu = random_density(grid, Support::E, rng);
      before[r] = tv_distance(mu, nu);
      after[r] = tv_distance(q.push(mu), q.push(nu));
    });
    double worst = 0.0;
    for (std::size_t r = 0; r < o.pairs; ++r) {
      const double ratio = before[r] > 0.0 ? after[r] / before[r] : 0.0;
      worst = std::max(worst, ratio);
      t.rows.push_back({o.eps_q[e], static_cast<double>(r), before[r], after[r], ratio});
    }
    max_ratio.push_back(worst);
    bound.push_back(1.0 - o.eps_q[e]);
    rep.passed = rep.passed && worst <= 1.0 - o.eps_q[e] + o.tol;
  }
  rep.metrics = {{"eps_q", o.eps_q}, {"pairs", o.pairs}, {"max_ratio", max_ratio}, {"bound", bound},
                 {"tolerance", o.tol}};
  rep.tables = {{"ratios", t}};
  return rep;
}

CheckReport check_metropolis_contraction(const Setup& s, const MetropolisContractionOptions& o) {
  CheckReport rep;
  rep.name = "metropolis-contraction";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  const GridSpec& grid = s.model.e_grid();
  const double eps_q = s.model.bank().params.eps_q;
  std::vector<double> lambdas{s.model.lambda()};
  lambdas.insert(lambdas.end(), o.extra_lambdas.begin(), o.extra_lambdas.end());
  Table t{{"lambda", "field", "osc", "bound", "max_ratio"}, {}};
  double worst_slack = std::numeric_limits<double>::infinity();
  rep.passed = true;
  for (std::size_t l = 0; l < lambdas.size(); ++l) {
    for (std::size_t f = 0; f < o.fields; ++f) {
      Rng frng = replica_stream(master, 1000 * l + f, o.pairs);
      const GridDensity field = random_field(s.model, frng);
      const double osc = oscillation(field);
      const MetropolisGridOperator op(grid, PotentialField(field).on_grid(grid), lambdas[l], s.model.bank());
      const double bound = 1.0 - eps_q * std::exp(-lambdas[l] * osc);
      std::vector<double> ratio(o.pairs);
      parallel_for(o.pairs, s.threads, [&](std::size_t r) {
        Rng rng = replica_stream(master, 1000 * l + f, r);
        const GridDensity mu = random_density(grid, Support::E, rng);
        const GridDensity nu = random_density(grid, Support::E, rng);
        const double before = tv_distance(mu, nu);
        ratio[r] = before > 0.0 ? tv_distance(op.push(mu), op.push(nu)) / before : 0.0;
      });
      const double worst = *std::max_element(ratio.begin(), ratio.end());
      worst_slack = std::min(worst_slack, bound - worst);
      rep.passed = rep.passed && worst <= bound + o.tol;
      t.rows.push_back({lambdas[l], static_cast<double>(f), osc, bound, worst});
    }
  }
  rep.metrics = {{"lambda", lambdas}, {"fields", o.fields}, {"pairs", o.pairs},
                 {"min_slack", worst_slack}, {"tolerance", o.tol}};
  rep.tables = {{"fields", t}};
  return rep;
}

CheckReport check_fixed_point(const Setup& s, const FixedPointOptions& o) {
  CheckReport rep;
  rep.name = "fixed-point";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  const ContractionConstants c = compute_constants(s.model.eps(), s.model.lambda(), s.model.bank());
  rep.metrics["constants"] = constants_json(c);
  if (!c.feasible) {
    rep.metrics["reason"] = "(eps, lambda) is outside the contraction region";
    return rep;
  }
  std::vector<FixedPointResult> results(o.inits);
  std::vector<std::string> failures(o.inits);
  parallel_for(o.inits, s.threads, [&](std::size_t i) {
    Rng rng = replica_stream(master, 0, i);
    try {
      results[i] = fixed_point(random_state(s.model, rng), s.model, o.tol);
    } catch (const ConvergenceError& e) {
      failures[i] = e.what();
    }
  });
  for (const auto& f : failures) {
    if (!f.empty()) {
      rep.metrics["reason"] = f;
      return rep;
    }
  }
  Table trace{{"init", "k", "alpha", "ratio"}, {}};
  double max_ratio = 0.0;
  double max_excess = -std::numeric_limits<double>::infinity();
  std::vector<std::size_t> iterations;
  for (std::size_t i = 0; i < o.inits; ++i) {
    const auto& a = results[i].trace;
    iterations.push_back(results[i].iterations);
    for (std::size_t k = 0; k < a.size(); ++k) {
      double ratio = 0.0;
      if (k >= 2) {
        const double lhs = a[k] + c.kappa * a[k - 1];
        const double rhs = c.theta * (a[k - 1] + c.kappa * a[k - 2]);
        max_excess = std::max(max_excess, lhs - rhs);
        if (rhs > 0.0) {
          ratio = lhs / (a[k - 1] + c.kappa * a[k - 2]);
          max_ratio = std::max(max_ratio, ratio);
        }
      }
      trace.rows.push_back({static_cast<double>(i), static_cast<double>(k), a[k], ratio});
    }
  }
  double max_pair = 0.0;
  for (std::size_t i = 0; i < o.inits; ++i) {
    for (std::size_t j = i + 1; j < o.inits; ++j) {
      max_pair = std::max(max_pair, pair_distance(results[i].state, results[j].state));
    }
  }
  rep.passed = max_pair < o.pair_tol && max_excess <= o.recursion_tol;
  rep.metrics["iterations"] = iterations;
  rep.metrics["check_tolerance"] = o.tol;
  rep.metrics["max_pair_distance"] = max_pair;
  rep.metrics["pair_tolerance"] = o.pair_tol;
  rep.metrics["max_recursion_ratio"] = max_ratio;
  rep.metrics["max_recursion_excess"] = max_excess;
  rep.metrics["recursion_tolerance"] = o.recursion_tol;
  rep.metrics["osc_eta_fixed_point"] = oscillation(results[0].state.eta);
  rep.tables = {{"traces", trace}};
  return rep;
}

CheckReport check_two_trajectory(const Setup& s, const TwoTrajectoryOptions& o) {
  CheckReport rep;
  rep.name = "two-trajectory";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  const ContractionConstants c = compute_constants(s.model.eps(), s.model.lambda(), s.model.bank());
  rep.metrics["constants"] = constants_json(c);
  if (!c.feasible) {
    rep.metrics["reason"] = "(eps, lambda) is outside the contraction region";
    return rep;
  }
  const std::size_t horizon = *std::max_element(o.horizons.begin(), o.horizons.end());
  const double eps = s.model.eps();
  const double beta = s.model.bank().derived.beta_pprime;
  const double m_qq0 = s.model.bank().derived.m_q_q0;
  struct PairResult {
    std::vector<double> d, field_excess;
    double m0_sup = 0.0;
  };
  std::vector<PairResult> res(o.pairs);
  parallel_for(o.pairs, s.threads, [&](std::size_t p) {
    Rng rng = replica_stream(master, 0, p);
    MeanFieldState a = random_state(s.model, rng);
    MeanFieldState b = random_state(s.model, rng);
    PairResult& r = res[p];
    const auto v = a.m.values();
    r.m0_sup = *std::max_element(v.begin(), v.end());
    r.d.push_back(pair_distance(a, b));
    for (std::size_t k = 1; k <= horizon; ++k) {
      MeanFieldState a2 = phi_step(a, s.model);
      MeanFieldState b2 = phi_step(b, s.model);
      const double bound = (1.0 - eps) * tv_distance(a.eta, b.eta) + eps * beta * tv_distance(a.m, b.m);
      r.field_excess.push_back(tv_distance(a2.eta, b2.eta) - bound);
      a = std::move(a2);
      b = std::move(b2);
      r.d.push_back(pair_distance(a, b));
    }
  });
  Table t{{"pair", "k", "distance", "contraction_bound", "initial_gap_bound"}, {}};
  bool contraction_ok = true, recursion_ok = true, gap_ok = true, field_ok = true;
  double worst_contraction = 0.0, worst_recursion = 0.0, worst_gap = 0.0, worst_field = -1.0;
  for (std::size_t p = 0; p < o.pairs; ++p) {
    const PairResult& r = res[p];
    const double gap_const = 2.0 + c.kappa + 2.0 * s.model.lambda() * (r.m0_sup + m_qq0);
    for (std::size_t k = 0; k <= horizon; ++k) {
      const double cb = 4.0 * std::pow(c.theta, static_cast<double>(k) - 1.0);
      const double gb = k >= 1 ? std::pow(c.theta, static_cast<double>(k) - 1.0) * gap_const * r.d[0] : 0.0;
      t.rows.push_back({static_cast<double>(p), static_cast<double>(k), r.d[k], cb, gb});
      if (std::find(o.horizons.begin(), o.horizons.end(), k) != o.horizons.end()) {
        worst_contraction = std::max(worst_contraction, r.d[k] / cb);
        contraction_ok = contraction_ok && r.d[k] <= cb + o.tol;
      }
      if (k >= 1) {
        worst_gap = std::max(worst_gap, r.d[k] / gb);
        gap_ok = gap_ok && r.d[k] <= gb + o.tol;
        worst_field = std::max(worst_field, r.field_excess[k - 1]);
        field_ok = field_ok && r.field_excess[k - 1] <= o.tol;
      }
      if (k >= 2) {
        const double prev = r.d[k - 1] + c.kappa * r.d[k - 2];
        const double lhs = r.d[k] + c.kappa * r.d[k - 1];
        if (prev > 0.0) worst_recursion = std::max(worst_recursion, lhs / prev);
        recursion_ok = recursion_ok && lhs <= c.theta * prev + o.tol;
      }
    }
  }
  rep.passed = contraction_ok && recursion_ok && gap_ok && field_ok;
  rep.metrics["horizons"] = o.horizons;
  rep.metrics["pairs"] = o.pairs;
  rep.metrics["contraction_holds"] = contraction_ok;
  rep.metrics["max_contraction_ratio"] = worst_contraction;
  rep.metrics["recursion_holds"] = recursion_ok;
  rep.metrics["max_recursion_ratio"] = worst_recursion;
  rep.metrics["initial_gap_holds"] = gap_ok;
  rep.metrics["max_initial_gap_ratio"] = worst_gap;
  rep.metrics["field_contraction_holds"] = field_ok;
  rep.metrics["max_field_contraction_excess"] = worst_field;
  rep.metrics["tolerance"] = o.tol;
  rep.tables = {{"distances", t}};
  return rep;
}

CheckReport check_finite_horizon_agents(const Setup& s, const FiniteHorizonOptions& o) {
  CheckReport rep;
  rep.name = "finite-horizon-agents";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  const auto traj = meanfield_trajectory(initial_state(s.ic, s.model), s.model, o.horizon);
  const MeanFieldState& ref = traj.back();
  Table per_seed;
  const Trend t = size_trend(
      s, master, o,
      [&](std::size_t n, std::uint64_t seed) {
        const auto snaps = run_system(s.model, s.ic, run_options(n, o.horizon, seed, {o.horizon}));
        const AgentSnapshot& snap = snaps.back();
        return std::pair{net_distance(snap.positions, ref.m, s.net), sup_distance(snap.field.grid(), ref.eta)};
      },
      per_seed);
  rep.passed = t.passed;
  rep.metrics = trend_json(t, o.sizes, o.max_slope);
  rep.metrics["horizon"] = o.horizon;
  rep.metrics["seeds"] = o.seeds;
  rep.tables = {{"errors", per_seed}};
  return rep;
}

CheckReport check_finite_horizon_scheme(const Setup& s, const SchemeHorizonOptions& o) {
  CheckReport rep;
  rep.name = "finite-horizon-scheme";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  const Model& model = s.model;
  const FiniteHorizonOptions& tr = o.trend;
  const auto traj = meanfield_trajectory(initial_state(s.ic, model), model, tr.horizon);
  const MeanFieldState& ref = traj.back();
  Table per_seed;
  const Trend t = size_trend(
      s, master, tr,
      [&](std::size_t n, std::uint64_t seed) {
        const auto snaps = run_scheme(model, s.ic, run_options(n, tr.horizon, seed, {tr.horizon}));
        const SchemeSnapshot& snap = snaps.back();
        return std::pair{net_distance(snap.positions, ref.m, s.net),
                         sup_distance(raster(snap.field, model), ref.eta)};
      },
      per_seed);

  // Rasterised scheme field against the exact mixture driven by the same
  // agent history. Each resampling adds at most
  // (1/sqrt(N)) int sqrt(eta[phi_P(y - .)^2]) dy in expected TV, damped by
  // (1 - eps) per later step.
  const std::size_t k = o.oracle_horizon;
  const std::size_t n = o.oracle_agents;
  const double eps = model.eps();
  const double sp = model.bank().params.p_sigma;
  const std::size_t dim = model.domain().dim;
  const GridSpec& fg = model.field_grid();
  const GaussianMixture eta0 = initial_eta_mixture(s.ic, model);
  const double sq_norm = std::pow(2.0 * std::sqrt(std::numbers::pi) * sp, -static_cast<double>(dim));
  auto resampling_spread = [&](const GaussianMixture& mix) {
    double acc = 0.0;
    for (std::size_t c = 0; c < fg.size(); ++c) {
      const Point y = fg.center(c);
      double v = 0.0;
      for (const auto& comp : mix.components) {
        const double sd = std::sqrt(comp.sigma * comp.sigma + 0.5 * sp * sp);
        v += comp.weight * normal::iso_pdf(dim, squared_distance(y, comp.mean), sd);
      }
      acc += std::sqrt(sq_norm * v);
    }
    return acc * fg.cell_volume() / std::sqrt(static_cast<double>(n));
  };
  std::vector<double> tv(o.oracle_seeds), slack(o.oracle_seeds);
  parallel_for(o.oracle_seeds, s.threads, [&](std::size_t r) {
    const auto snaps = run_scheme(model, s.ic, run_options(n, k, replica_seed(master ^ 0x5eedULL, r), {}));
    std::vector<EmpiricalMeasure> history;
    for (std::size_t j = 0; j < k; ++j) history.push_back(snaps[j].positions);
    const GaussianMixture oracle = exact_field_oracle(history, eta0, model);
    tv[r] = tv_distance(raster(snaps[k].field, model), raster(oracle, model));
    double sl = 0.0;
    for (std::size_t j = 1; j <= k; ++j) {
      sl += std::pow(1.0 - eps, static_cast<double>(k - j + 1)) * resampling_spread(snaps[j - 1].field);
    }
    slack[r] = sl;
  });
  const MeanSe tv_m = mean_se(tv);
  const MeanSe slack_m = mean_se(slack);
  const double oracle_bound = o.raster_tol + slack_m.mean + 3.0 * tv_m.se;
  const bool oracle_ok = tv_m.mean <= oracle_bound;
  Table oracle_t{{"seed", "tv", "slack"}, {}};
  for (std::size_t r = 0; r < o.oracle_seeds; ++r) oracle_t.rows.push_back({static_cast<double>(r), tv[r], slack[r]});

  rep.passed = t.passed && oracle_ok;
  rep.metrics = trend_json(t, tr.sizes, tr.max_slope);
  rep.metrics["horizon"] = tr.horizon;
  rep.metrics["seeds"] = tr.seeds;
  rep.metrics["trend_passed"] = t.passed;
  rep.metrics["oracle"] = {{"N", n},
                           {"k", k},
                           {"seeds", o.oracle_seeds},
                           {"mean_tv", tv_m.mean},
                           {"tv_std_error", tv_m.se},
                           {"mean_slack", slack_m.mean},
                           {"raster_tolerance", o.raster_tol},
                           {"bound", oracle_bound},
                           {"passed", oracle_ok}};
  rep.tables = {{"errors", per_seed}, {"oracle", oracle_t}};
  return rep;
}

CheckReport check_uniform_in_time(const Setup& s, const UniformInTimeOptions& o) {
  CheckReport rep;
  rep.name = "uniform-in-time";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  const Model& model = s.model;
  const std::size_t horizon = *std::max_element(o.horizons.begin(), o.horizons.end());
  const auto traj = meanfield_trajectory(initial_state(s.ic, model), model, horizon);
  const std::size_t h = o.horizons.size();
  // err[system][seed][horizon index]
  std::vector<std::vector<std::vector<double>>> err(2, std::vector<std::vector<double>>(o.seeds, std::vector<double>(h)));
  parallel_for(o.seeds, s.threads, [&](std::size_t r) {
    const SystemOptions opt = run_options(o.n_agents, horizon, replica_seed(master, r), o.horizons);
    const auto agents = run_system(model, s.ic, opt);
    for (std::size_t i = 0; i < h; ++i) {
      const MeanFieldState& ref = traj[agents[i].k];
      err[0][r][i] = net_distance(agents[i].positions, ref.m, s.net) + tv_distance(agents[i].field.grid(), ref.eta);
    }
    const auto scheme = run_scheme(model, s.ic, opt);
    for (std::size_t i = 0; i < h; ++i) {
      const MeanFieldState& ref = traj[scheme[i].k];
      err[1][r][i] = net_distance(scheme[i].positions, ref.m, s.net) + tv_distance(raster(scheme[i].field, model), ref.eta);
    }
  });
  const std::vector<double> logn = log_of(as_doubles(o.horizons));
  const char* names[2] = {"agents", "scheme"};
  Table t{{"system", "seed", "n", "error"}, {}};
  rep.passed = true;
  for (std::size_t sys = 0; sys < 2; ++sys) {
    std::vector<double> means, ses, slopes;
    for (std::size_t i = 0; i < h; ++i) {
      std::vector<double> col;
      for (std::size_t r = 0; r < o.seeds; ++r) col.push_back(err[sys][r][i]);
      const MeanSe m = mean_se(col);
      means.push_back(m.mean);
      ses.push_back(m.se);
    }
    for (std::size_t r = 0; r < o.seeds; ++r) {
      slopes.push_back(ls_slope(logn, err[sys][r]));
      for (std::size_t i = 0; i < h; ++i) {
        t.rows.push_back({static_cast<double>(sys), static_cast<double>(r), static_cast<double>(o.horizons[i]), err[sys][r][i]});
      }
    }
    const double ratio = *std::max_element(means.begin(), means.end()) / *std::min_element(means.begin(), means.end());
    const double p = one_sided_p(slopes);
    const bool ok = ratio < o.max_ratio && p >= o.alpha;
    rep.passed = rep.passed && ok;
    rep.metrics[names[sys]] = {{"mean_error", means}, {"std_error", ses}, {"max_min_ratio", ratio},
                               {"mean_slope_vs_log_n", mean_se(slopes).mean}, {"growth_p_value", p},
                               {"passed", ok}};
  }
  rep.metrics["N"] = o.n_agents;
  rep.metrics["horizons"] = o.horizons;
  rep.metrics["seeds"] = o.seeds;
  rep.metrics["max_ratio"] = o.max_ratio;
  rep.metrics["alpha"] = o.alpha;
  rep.tables = {{"errors", t}};
  return rep;
}

CheckReport check_commuting_limits(const Setup& s, const CommutingLimitsOptions& o) {
  CheckReport rep;
  rep.name = "commuting-limits";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  const Model& model = s.model;
  FixedPointResult fp;
  try {
    fp = fixed_point(initial_state(s.ic, model), model, 1e-10);
  } catch (const ConvergenceError& e) {
    rep.metrics["reason"] = e.what();
    return rep;
  }
  const MeanFieldState& inf = fp.state;
  const std::size_t horizon = *std::max_element(o.horizons.begin(), o.horizons.end());
  const std::size_t nh = o.horizons.size(), ns = o.sizes.size();
  // e[size][seed][horizon]
  std::vector<std::vector<std::vector<double>>> e(ns, std::vector<std::vector<double>>(o.seeds, std::vector<double>(nh)));
  for (std::size_t j = 0; j < ns; ++j) {
    parallel_for(o.seeds, s.threads, [&](std::size_t r) {
      const auto snaps = run_system(model, s.ic, run_options(o.sizes[j], horizon, replica_seed(master, r), o.horizons));
      for (std::size_t i = 0; i < nh; ++i) {
        e[j][r][i] = net_distance(snaps[i].positions, inf.m, s.net) + tv_distance(snaps[i].field.grid(), inf.eta);
      }
    });
  }
  std::vector<std::vector<double>> mean(ns, std::vector<double>(nh)), se(ns, std::vector<double>(nh));
  Table t{{"n", "N", "mean_error", "std_error"}, {}};
  for (std::size_t j = 0; j < ns; ++j) {
    for (std::size_t i = 0; i < nh; ++i) {
      std::vector<double> col;
      for (std::size_t r = 0; r < o.seeds; ++r) col.push_back(e[j][r][i]);
      const MeanSe m = mean_se(col);
      mean[j][i] = m.mean;
      se[j][i] = m.se;
      t.rows.push_back({static_cast<double>(o.horizons[i]), static_cast<double>(o.sizes[j]), m.mean, m.se});
    }
  }
  // Time path at the largest N: non-increasing within 3 standard errors and
  // overall decreasing.
  const std::size_t jl = ns - 1;
  bool time_ok = mean[jl][nh - 1] < mean[jl][0];
  for (std::size_t i = 1; i < nh; ++i) {
    const double slack = 3.0 * std::hypot(se[jl][i], se[jl][i - 1]);
    time_ok = time_ok && mean[jl][i] <= mean[jl][i - 1] + slack;
  }
  // Size path at the longest horizon: strictly decreasing.
  std::vector<double> plateau;
  for (std::size_t j = 0; j < ns; ++j) plateau.push_back(mean[j][nh - 1]);
  const bool size_ok = strictly_decreasing(plateau);
  rep.passed = time_ok && size_ok;
  rep.metrics = {{"horizons", o.horizons},
                 {"N", o.sizes},
                 {"seeds", o.seeds},
                 {"mean_error", mean},
                 {"std_error", se},
                 {"time_path_decreasing", time_ok},
                 {"size_path_decreasing", size_ok},
                 {"plateau", plateau},
                 {"fixed_point_iterations", fp.iterations}};
  rep.tables = {{"matrix", t}};
  return rep;
}

CheckReport check_propagation_of_chaos(const Setup& s, const ChaosOptions& o) {
  CheckReport rep;
  rep.name = "propagation-of-chaos";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  KernelParams kp = s.model.bank().params;
  kp.pprime_sigma = o.pprime_sigma;
  const Model model(s.model.domain(), kp, s.model.e_grid().cells[0], o.eps, o.lambda);
  const auto traj = meanfield_trajectory(initial_state(s.ic, model), model, o.horizon);
  const double mu = traj.back().m.integrate([](const Point& x) { return x[0]; });
  const std::vector<TestFunction> phis(2, [mu](const Point& x) { return x[0] - mu; });
  const std::vector<double> targets(2, 0.0);
  std::vector<double> gaps, means, ses;
  Table t{{"N", "gap", "mean", "std_error"}, {}};
  for (std::size_t n : o.sizes) {
    std::vector<EmpiricalMeasure> reps(o.seeds);
    parallel_for(o.seeds, s.threads, [&](std::size_t r) {
      reps[r] = run_system(model, s.ic, run_options(n, o.horizon, replica_seed(master, r), {o.horizon})).back().positions;
    });
    const ProductGap g = marginal_product_gap(reps, phis, targets);
    gaps.push_back(g.gap);
    means.push_back(g.mean);
    ses.push_back(g.std_error);
    t.rows.push_back({static_cast<double>(n), g.gap, g.mean, g.std_error});
  }
  rep.passed = strictly_decreasing(gaps);
  std::vector<double> scaled;
  for (std::size_t i = 0; i < gaps.size(); ++i) scaled.push_back(gaps[i] * static_cast<double>(o.sizes[i]));
  rep.metrics = {{"N", o.sizes},           {"seeds", o.seeds},  {"horizon", o.horizon},
                 {"eps", o.eps},           {"lambda", o.lambda}, {"pprime_sigma", o.pprime_sigma},
                 {"test_function", "x0 - m_k(x0), both factors"},
                 {"gap", gaps},            {"u_mean", means},   {"std_error", ses},
                 {"n_times_gap", scaled}};
  rep.tables = {{"gaps", t}};
  return rep;
}

double tightness_radius(const Model& model, const InitialCondition& ic, double delta) {
  const double eps = model.eps();
  if (!(eps > 0.0)) return std::numeric_limits<double>::infinity();
  if (!(delta > 0.0)) throw DomainError("tightness_radius: delta must be positive");
  // Terms older than k0 steps carry total weight (1 - eps)^(k0 + 1) <= delta / 2.
  std::size_t k0 = 0;
  while (std::pow(1.0 - eps, static_cast<double>(k0 + 1)) > 0.5 * delta) ++k0;
  const BoxDomain& dom = model.domain();
  const double sp = model.bank().params.p_sigma;
  const double spp = model.bank().params.pprime_sigma;
  const GaussianMixture eta0 = initial_eta_mixture(ic, model);
  double s0 = 0.0, dist = 0.0;
  for (const auto& c : eta0.components) {
    s0 = std::max(s0, c.sigma);
    for (std::size_t a = 0; a < dom.dim; ++a) {
      dist = std::max({dist, dom.lower[a] - c.mean[a], c.mean[a] - dom.upper[a]});
    }
  }
  const double sigma_max = std::sqrt(std::max(spp * spp, s0 * s0) + static_cast<double>(k0) * sp * sp);
  // Each surviving component leaves the widened box with probability <= delta / 2.
  const double z = normal::quantile(1.0 - 0.25 * delta / static_cast<double>(dom.dim));
  return z * sigma_max + dist;
}

CheckReport check_tightness(const Setup& s, const TightnessOptions& o) {
  CheckReport rep;
  rep.name = "tightness";
  const std::uint64_t master = check_seed(s.seed, rep.name);
  const Model& model = s.model;
  const BoxDomain& dom = model.domain();
  const double eps = model.eps();
  const double sp = model.bank().params.p_sigma;
  const double spp = model.bank().params.pprime_sigma;
  const GaussianMixture eta0 = initial_eta_mixture(s.ic, model);
  const GridSpec& eg = model.e_grid();

  auto widened = [&](double r, Point& lo, Point& hi) {
    lo = dom.lower;
    hi = dom.upper;
    for (std::size_t a = 0; a < dom.dim; ++a) {
      lo[a] -= r;
      hi[a] += r;
    }
  };
  // Mean-field eta_n(K^c) from the closed-form expansion
  // eta_n = sum_k eps (1 - eps)^k m_{n-1-k} P' P^k + (1 - eps)^n eta0 P^n,
  // with m_j carried as point masses at the cell centres.
  const auto traj = meanfield_trajectory(initial_state(s.ic, model), model, o.steps);
  auto meanfield_outside = [&](double r, double eps_used, const std::vector<MeanFieldState>& tr) {
    Point lo, hi;
    widened(r, lo, hi);
    std::vector<std::vector<double>> out(o.steps, std::vector<double>(eg.size()));
    for (std::size_t k = 0; k < o.steps; ++k) {
      const double sig = std::sqrt(spp * spp + static_cast<double>(k) * sp * sp);
      for (std::size_t c = 0; c < eg.size(); ++c) out[k][c] = gaussian_outside(eg.center(c), sig, lo, hi, dom.dim);
    }
    std::vector<double> mass(o.steps + 1);
    for (std::size_t n = 0; n <= o.steps; ++n) {
      GaussianMixture spread = eta0;
      for (auto& c : spread.components) c.sigma = std::sqrt(c.sigma * c.sigma + static_cast<double>(n) * sp * sp);
      double v = std::pow(1.0 - eps_used, static_cast<double>(n)) * mixture_outside(spread, lo, hi);
      for (std::size_t k = 0; k < n && eps_used > 0.0; ++k) {
        const GridDensity& m = tr[n - 1 - k].m;
        double acc = 0.0;
        for (std::size_t c = 0; c < eg.size(); ++c) acc += m[c] * out[k][c];
        v += eps_used * std::pow(1.0 - eps_used, static_cast<double>(k)) * acc * eg.cell_volume();
      }
      mass[n] = v;
    }
    return mass;
  };

  const double r = tightness_radius(model, s.ic, o.delta);
  const std::vector<double> mf = meanfield_outside(r, eps, traj);
  const std::vector<double> mf_box = meanfield_outside(dom.margin, eps, traj);

  // Scheme: E(eta~_n(K^c)) over seeds, exact for the mixture fields.
  std::vector<std::vector<double>> sch(o.scheme_seeds), sch_box(o.scheme_seeds);
  parallel_for(o.scheme_seeds, s.threads, [&](std::size_t i) {
    const auto snaps = run_scheme(model, s.ic, run_options(o.scheme_agents, o.steps, replica_seed(master, i), {}));
    Point lo, hi, blo, bhi;
    widened(r, lo, hi);
    widened(dom.margin, blo, bhi);
    for (const auto& snap : snaps) {
      sch[i].push_back(mixture_outside(snap.field, lo, hi));
      sch_box[i].push_back(mixture_outside(snap.field, blo, bhi));
    }
  });
  std::vector<double> sch_mean(o.steps + 1, 0.0), sch_box_mean(o.steps + 1, 0.0);
  for (std::size_t n = 0; n <= o.steps; ++n) {
    for (std::size_t i = 0; i < o.scheme_seeds; ++i) {
      sch_mean[n] += sch[i][n];
      sch_box_mean[n] += sch_box[i][n];
    }
    sch_mean[n] /= static_cast<double>(o.scheme_seeds);
    sch_box_mean[n] /= static_cast<double>(o.scheme_seeds);
  }
  const double mf_max = *std::max_element(mf.begin(), mf.end());
  const double sch_max = *std::max_element(sch_mean.begin(), sch_mean.end());
  rep.passed = mf_max < o.delta && sch_max < o.delta;

  // delta = 1: K is close to E and the bound is trivial.
  const double r1 = tightness_radius(model, s.ic, 1.0);
  const std::vector<double> mf1 = meanfield_outside(r1, eps, traj);
  // Pure diffusion keeps widening eta0 P^n, so no fixed K works.
  Point lo, hi;
  widened(r, lo, hi);
  std::vector<double> diffusion;
  for (std::size_t n : {std::size_t{0}, o.steps / 2, o.steps}) {
    GaussianMixture spread = eta0;
    for (auto& c : spread.components) c.sigma = std::sqrt(c.sigma * c.sigma + static_cast<double>(n) * sp * sp);
    diffusion.push_back(mixture_outside(spread, lo, hi));
  }

  Table t{{"k", "meanfield_outside", "scheme_outside_mean", "meanfield_outside_field_box", "scheme_outside_field_box"}, {}};
  for (std::size_t n = 0; n <= o.steps; ++n) t.rows.push_back({static_cast<double>(n), mf[n], sch_mean[n], mf_box[n], sch_box_mean[n]});
  rep.metrics = {{"delta", o.delta},
                 {"radius", r},
                 {"steps", o.steps},
                 {"scheme_agents", o.scheme_agents},
                 {"scheme_seeds", o.scheme_seeds},
                 {"meanfield_max_outside", mf_max},
                 {"scheme_max_mean_outside", sch_max},
                 {"field_box_margin", dom.margin},
                 {"meanfield_max_outside_field_box", *std::max_element(mf_box.begin(), mf_box.end())},
                 {"scheme_max_mean_outside_field_box", *std::max_element(sch_box_mean.begin(), sch_box_mean.end())},
                 {"delta_one_radius", r1},
                 {"delta_one_passed", *std::max_element(mf1.begin(), mf1.end()) < 1.0},
                 {"pure_diffusion_steps", {0, o.steps / 2, o.steps}},
                 {"pure_diffusion_outside", diffusion}};
  rep.tables = {{"outside_mass", t}};
  return rep;
}

CheckReport check_determinism(const Setup& s, const DeterminismOptions& o) {
  CheckReport rep;
  rep.name = "determinism";
  const std::uint64_t seed = check_seed(s.seed, rep.name);
  auto render = [&](std::size_t threads) {
    SystemOptions opt = run_options(o.n_agents, o.horizon, seed, {});
    opt.threads = threads;
    Artifacts out = agent_artifacts(run_system(s.model, s.ic, opt), s.model);
    out.merge(scheme_artifacts(run_scheme(s.model, s.ic, opt), s.model));
    Setup small = s;
    small.threads = threads;
    const CheckReport r = check_mc_bound(small, {{25}, 20});
    out["report.json"] = emit_report({r}, s.seed, "determinism").dump(1);
    for (const auto& [name, table] : r.tables) out["mc-bound_" + name + ".csv"] = table_csv(table);
    return out;
  };
  const Artifacts a = render(1);
  const Artifacts b = render(1);
  const Artifacts c = render(o.parallel);
  json files = json::object();
  rep.passed = !a.empty();
  for (const auto& [name, content] : a) {
    const bool same_run = b.count(name) && b.at(name) == content;
    const bool same_parallel = c.count(name) && c.at(name) == content;
    files[name] = {{"bytes", content.size()}, {"repeat_identical", same_run}, {"parallel_identical", same_parallel}};
    rep.passed = rep.passed && same_run && same_parallel;
  }
  rep.passed = rep.passed && a.size() == b.size() && a.size() == c.size();
  rep.metrics = {{"files", files}, {"parallel", o.parallel}, {"n_agents", o.n_agents}, {"horizon", o.horizon}};
  return rep;
}

// ---------------------------------------------------------------------------
// registry

const std::vector<CheckInfo>& check_catalog() {
  static const std::vector<CheckInfo> catalog{
      {"mc-bound", "empirical-measure error within 2/sqrt(N) plus net slack",
       [](const Setup& s) { return check_mc_bound(s); }},
      {"dobrushin", "TV contraction of the Q grid operator by 1 - eps_q",
       [](const Setup& s) { return check_dobrushin(s); }},
      {"metropolis-contraction", "TV contraction of M^eta by 1 - eps_q exp(-lambda osc(eta))",
       [](const Setup& s) { return check_metropolis_contraction(s); }},
      {"fixed-point", "random starts reach one fixed point; two-step recursion along the traces",
       [](const Setup& s) { return check_fixed_point(s); }},
      {"two-trajectory", "4 theta^(n-1) bound, two-step recursion, initial-gap and field contraction",
       [](const Setup& s) { return check_two_trajectory(s); }},
      {"finite-horizon-agents", "N-agent error at fixed k decreases in N",
       [](const Setup& s) { return check_finite_horizon_agents(s); }},
      {"finite-horizon-scheme", "scheme error at fixed k decreases in N; exact-mixture oracle agreement",
       [](const Setup& s) { return check_finite_horizon_scheme(s); }},
      {"uniform-in-time", "no error growth over long horizons at fixed N",
       [](const Setup& s) { return check_uniform_in_time(s); }},
      {"commuting-limits", "distance to the fixed point decreases along both limit orders",
       [](const Setup& s) { return check_commuting_limits(s); }},
      {"propagation-of-chaos", "two-agent product gap decreases in N",
       [](const Setup& s) { return check_propagation_of_chaos(s); }},
      {"tightness", "field mass outside a fixed compact stays below delta",
       [](const Setup& s) { return check_tightness(s); }},
      {"determinism", "byte-identical outputs across repeats and thread counts",
       [](const Setup& s) { return check_determinism(s); }},
  };
  return catalog;
}

const CheckInfo& find_check(const std::string& name) {
  for (const CheckInfo& c : check_catalog()) {
    if (c.name == name) return c;
  }
  throw ConfigError("unknown check '" + name + "'");
}

CheckReport run_check(const CheckInfo& info, const Setup& s) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckReport r = info.run(s);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

json emit_report(const std::vector<CheckReport>& reports, std::uint64_t seed, const std::string& config_hash) {
  json checks = json::array();
  bool all = true;
  for (const CheckReport& r : reports) {
    json tables = json::object();
    for (const auto& [name, t] : r.tables) tables[name] = t.columns;
    checks.push_back({{"name", r.name},
                      {"passed", r.passed},
                      {"seed", check_seed(seed, r.name)},
                      {"metrics", r.metrics},
                      {"tables", tables}});
    all = all && r.passed;
  }
  return {{"seed", seed}, {"config_hash", config_hash}, {"passed", all}, {"checks", checks}};
}

}  // namespace agentfield
