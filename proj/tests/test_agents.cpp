#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "doctest.h"

#include "agentfield/agents.hpp"
#include "agentfield/experiments.hpp"
#include "support.hpp"

using namespace agentfield;
using agentfield::testing::at;
using agentfield::testing::default_model;

namespace {

SystemOptions options(std::size_t n, std::size_t horizon, std::uint64_t seed = 3) {
  SystemOptions o;
  o.n_agents = n;
  o.horizon = horizon;
  o.seed = seed;
  return o;
}

std::vector<double> sorted_coords(const EmpiricalMeasure& m) {
  std::vector<double> v;
  for (const Point& p : m.points) v.push_back(p[0]);
  std::sort(v.begin(), v.end());
  return v;
}

}  // namespace

TEST_CASE("horizon zero echoes the initial state") {
  const Model model = default_model();
  const SystemOptions o = options(30, 0);
  const auto snaps = run_system(model, InitialCondition{}, o);
  REQUIRE(snaps.size() == 1);
  const AgentSystemState s0 = init_system(model, InitialCondition{}, o);
  CHECK(snaps[0].k == 0);
  CHECK(snaps[0].positions.points == s0.positions.points);
  CHECK(sup_distance(snaps[0].field.grid(), initial_eta(InitialCondition{}, model)) == 0.0);
}

TEST_CASE("runs are reproducible at any thread count") {
  const Model model = default_model();
  SystemOptions o = options(64, 5);
  const auto a = run_system(model, InitialCondition{}, o);
  const auto b = run_system(model, InitialCondition{}, o);
  o.threads = 4;
  const auto c = run_system(model, InitialCondition{}, o);
  REQUIRE(a.size() == 6);
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].positions.points == b[k].positions.points);
    CHECK(a[k].positions.points == c[k].positions.points);
    CHECK(sup_distance(a[k].field.grid(), c[k].field.grid()) == 0.0);
  }
  o.seed = 4;
  CHECK(run_system(model, InitialCondition{}, o).back().positions.points != a.back().positions.points);
}

TEST_CASE("positions stay in E and the field keeps unit mass") {
  const Model model = default_model();
  for (const auto& snap : run_system(model, InitialCondition{}, options(50, 8))) {
    for (const Point& p : snap.positions.points) CHECK(model.domain().contains(p));
    CHECK(snap.field.grid().mass() == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("without coupling the field diffuses on its own") {
  const Model model = default_model(256, 0.0, 0.0);
  const auto snaps = run_system(model, InitialCondition{}, options(1, 6));
  const auto traj = meanfield_trajectory(initial_state(InitialCondition{}, model), model, 6);
  for (std::size_t k = 0; k < snaps.size(); ++k) {
    CHECK(sup_distance(snaps[k].field.grid(), traj[k].eta) < 1e-12);
    CHECK(model.domain().contains(snaps[k].positions.points[0]));
  }
}

TEST_CASE("the field is driven by the pre-move agents") {
  const Model model = default_model(256, 1.0, 0.5);
  SystemOptions o = options(7, 4);
  o.mode = FieldMode::Mixture;
  const auto snaps = run_system(model, InitialCondition{}, o);
  for (std::size_t k = 1; k < snaps.size(); ++k) {
    const GaussianMixture& f = snaps[k].field.mixture();
    REQUIRE(f.components.size() == 7);
    for (std::size_t j = 0; j < 7; ++j) {
      CHECK(f.components[j].mean == snaps[k - 1].positions.points[j]);
      CHECK(f.components[j].weight == doctest::Approx(1.0 / 7.0));
      CHECK(f.components[j].sigma == model.bank().params.pprime_sigma);
    }
  }
}

TEST_CASE("mixture budget is enforced") {
  const Model model = default_model();
  SystemOptions o = options(10, 5);
  o.mode = FieldMode::Mixture;
  o.mixture_budget = 25;
  CHECK_THROWS_AS(run_system(model, InitialCondition{}, o), CapacityError);
}

TEST_CASE("one-step law of an agent matches the pushforward oracle") {
  const Model model = default_model(256, 0.3, 2.0);
  Rng gen(5);
  const GridDensity field = random_field(model, gen);
  const std::size_t n = 10000, start_cell = 100, bins = 16;
  AgentSystemState s{EmpiricalMeasure{1, std::vector<Point>(n, model.e_grid().center(start_cell))},
                     PotentialField(field), 0, {}};
  for (std::size_t i = 0; i < n; ++i) s.streams.push_back(make_stream(11, kTagAgents, i));
  const AgentSystemState next = system_step(std::move(s), model);

  const PotentialField psi(field);
  const MetropolisGridOperator op(model.e_grid(), psi.on_grid(model.e_grid()), model.lambda(), model.bank());
  const std::vector<double> row = op.row(start_cell);
  std::vector<double> expected(bins, 0.0);
  const std::size_t per_bin = row.size() / bins;
  for (std::size_t j = 0; j < row.size(); ++j) expected[j / per_bin] += row[j];
  const auto observed = agentfield::testing::histogram(next.positions.points, 0.0, 1.0, bins);
  double chi2 = 0.0;
  for (std::size_t b = 0; b < bins; ++b) chi2 += n * std::pow(observed[b] - expected[b], 2) / expected[b];
  const boost::math::chi_squared dist(static_cast<double>(bins - 1));
  CHECK(chi2 < boost::math::quantile(dist, 0.999));
}

TEST_CASE("relabelling agents relabels the outcome") {
  const Model model = default_model();
  const SystemOptions o = options(40, 0);
  AgentSystemState s = init_system(model, InitialCondition{}, o);
  AgentSystemState t = s;
  std::vector<std::size_t> perm(40);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), Rng(2));
  for (std::size_t i = 0; i < 40; ++i) {
    t.positions.points[i] = s.positions.points[perm[i]];
    t.streams[i] = s.streams[perm[i]];
  }
  for (int k = 0; k < 4; ++k) {
    s = system_step(std::move(s), model);
    t = system_step(std::move(t), model);
  }
  CHECK(sorted_coords(s.positions) == sorted_coords(t.positions));
  CHECK(sup_distance(s.field.grid(), t.field.grid()) < 1e-12);
}

TEST_CASE("field on grid rasterises mixtures") {
  const Model model = default_model();
  const PotentialField f(single_gaussian(1, at(0.5), 0.2));
  const GridDensity g = field_on_grid(f, model);
  CHECK(g.spec() == model.field_grid());
  CHECK(g.mass() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("product gap estimator") {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<EmpiricalMeasure> reps(30, EmpiricalMeasure{1, std::vector<Point>(9)});
  for (auto& r : reps) {
    for (Point& p : r.points) p = at(u(rng));
  }
  const std::vector<TestFunction> phis{[](const Point& x) { return x[0]; },
                                       [](const Point& x) { return std::cos(3.0 * x[0]); },
                                       [](const Point& x) { return x[0] * x[0] - 0.2; }};

  SUBCASE("single function is the plain error of the empirical mean") {
    const std::vector<double> target{0.45};
    const ProductGap g = marginal_product_gap(reps, std::span(phis).first(1), target);
    double mean = 0.0;
    for (const auto& r : reps) mean += r.integrate(phis[0]) / reps.size();
    CHECK(g.mean == doctest::Approx(mean).epsilon(1e-13));
    CHECK(g.gap == doctest::Approx(std::abs(mean - 0.45)).epsilon(1e-13));
    CHECK(g.replicas == 30);
  }

  SUBCASE("matches brute force over distinct ordered tuples") {
    const std::vector<double> targets{0.5, 0.1, 0.2};
    double mean = 0.0;
    std::vector<double> per;
    for (const auto& r : reps) {
      double acc = 0.0, count = 0.0;
      for (std::size_t i = 0; i < 9; ++i) {
        for (std::size_t j = 0; j < 9; ++j) {
          for (std::size_t k = 0; k < 9; ++k) {
            if (i == j || j == k || i == k) continue;
            acc += phis[0](r.points[i]) * phis[1](r.points[j]) * phis[2](r.points[k]);
            count += 1.0;
          }
        }
      }
      per.push_back(acc / count);
      mean += acc / count / reps.size();
    }
    const ProductGap g = marginal_product_gap(reps, phis, targets);
    CHECK(g.mean == doctest::Approx(mean).epsilon(1e-12));
    CHECK(g.gap == doctest::Approx(std::abs(mean - 0.01)).epsilon(1e-12));
    CHECK(g.std_error == doctest::Approx(mean_se(per).se).epsilon(1e-10));
  }
}

TEST_CASE("independent initial agents show no product gap") {
  const Model model = default_model();
  const InitialCondition ic;
  std::vector<EmpiricalMeasure> reps;
  for (std::uint64_t seed = 0; seed < 400; ++seed) {
    reps.push_back(init_system(model, ic, options(20, 0, seed)).positions);
  }
  const std::vector<TestFunction> phis{[](const Point& x) { return x[0]; },
                                       [](const Point& x) { return std::sin(4.0 * x[0]); }};
  const GridDensity m0 = initial_m(ic, model);
  const std::vector<double> targets{m0.integrate(phis[0]), m0.integrate(phis[1])};
  const ProductGap g = marginal_product_gap(reps, phis, targets);
  CHECK(g.gap <= 3.0 * g.std_error + 1e-5);
}

TEST_CASE("two-dimensional smoke run") {
  const Model model(agentfield::testing::unit_square(), KernelParams{}, 64, 0.3, 0.02);
  const InitialCondition ic;
  const auto snaps = run_system(model, ic, options(20, 2));
  REQUIRE(snaps.size() == 3);
  for (const Point& p : snaps.back().positions.points) CHECK(model.domain().contains(p));
  CHECK(snaps.back().field.grid().mass() == doctest::Approx(1.0).epsilon(1e-9));
  const MeanFieldState s = phi_step(initial_state(ic, model), model);
  CHECK(s.m.mass() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(s.eta.mass() == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(oscillation(s.eta) <= model.bank().derived.m_p_pprime);
}
