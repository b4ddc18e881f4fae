#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "agentfield/experiments.hpp"
#include "agentfield/meanfield.hpp"
#include "agentfield/metropolis.hpp"
#include "agentfield/normal.hpp"
#include "support.hpp"

using namespace agentfield;
using agentfield::testing::at;
using agentfield::testing::default_model;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

double theta_by_bisection(double s, double lm) {
  double lo = 0.0, hi = 10.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid * mid - s * mid - 4.0 * lm >= 0.0) hi = mid; else lo = mid;
  }
  return hi;
}

}  // namespace

TEST_CASE("decoupled update: pure diffusion and pure proposal") {
  const Model model = default_model(256, 0.0, 0.0);
  Rng rng(1);
  const MeanFieldState s = random_state(model, rng);
  const MeanFieldState next = phi_step(s, model);
  const auto diffused = model.p_convolver().apply(s.eta.values());
  CHECK(max_abs_diff(next.eta.values(), diffused) < 1e-12);
  const QGridOperator q(model.e_grid(), model.bank());
  CHECK(max_abs_diff(next.m.values(), q.push(s.m).values()) < 1e-10);
}

TEST_CASE("full replacement: the new field ignores the old one") {
  const Model model = default_model(256, 1.0, 0.02);
  Rng rng(2);
  const GridDensity m = random_density(model.e_grid(), Support::E, rng);
  const GridDensity a = field_update(random_field(model, rng), m, model).eta;
  const GridDensity b = field_update(random_field(model, rng), m, model).eta;
  CHECK(sup_distance(a, b) < 1e-12);
  const auto direct = model.pprime_convolver().apply(embed_in_field(m, model).values());
  CHECK(max_abs_diff(a.values(), direct) < 1e-10);
}

TEST_CASE("gaussian field convolves to the closed form") {
  const Model model = default_model(256, 0.0, 0.02);
  const GridDensity eta = rasterize(single_gaussian(1, at(0.5), 0.1), model.field_grid(), Support::FieldBox).density;
  const GridDensity m = GridDensity::uniform(model.e_grid(), Support::E);
  const GridDensity out = field_update(eta, m, model).eta;
  const double sigma = std::sqrt(0.1 * 0.1 + 0.2 * 0.2);
  double worst = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double y = model.field_grid().center(i)[0];
    worst = std::max(worst, std::abs(out[i] - normal::pdf((y - 0.5) / sigma) / sigma));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("updated fields are bounded and Lipschitz") {
  const Model model = default_model();
  const DerivedConstants& d = model.bank().derived;
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const GridDensity eta = random_field(model, rng, 0.01, 0.4);
    const GridDensity m = random_density(model.e_grid(), Support::E, rng);
    const FieldUpdate up = field_update(eta, m, model);
    CHECK(oscillation(up.eta) <= d.m_p_pprime);
    CHECK(up.eta.mass() == doctest::Approx(1.0).epsilon(1e-9));
    double slope = 0.0;
    for (std::size_t i = 0; i + 1 < up.eta.size(); ++i) {
      slope = std::max(slope, std::abs(up.eta[i + 1] - up.eta[i]) / model.field_grid().step[0]);
    }
    CHECK(slope <= d.lbar_p_pprime);
  }
}

TEST_CASE("empirical field update matches the grid update of a point histogram") {
  const Model model = default_model();
  Rng rng(4);
  const GridDensity eta = random_field(model, rng);
  EmpiricalMeasure emp{1, {}};
  std::vector<double> hist(model.e_grid().size(), 0.0);
  for (std::size_t i = 0; i < 40; ++i) {
    const std::size_t c = (i * 37) % model.e_grid().size();
    emp.points.push_back(model.e_grid().center(c));
    hist[c] += 1.0 / 40.0 / model.e_grid().cell_volume();
  }
  const GridDensity a = field_update(eta, emp, model).eta;
  const GridDensity b = field_update(eta, GridDensity(model.e_grid(), hist, Support::E), model).eta;
  CHECK(sup_distance(a, b) < 1e-3);
  CHECK(a.mass() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("one-step field contraction") {
  const Model model = default_model();
  const double eps = model.eps(), beta = model.bank().derived.beta_pprime;
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const GridDensity eta = random_field(model, rng), etap = random_field(model, rng);
    const GridDensity m = random_density(model.e_grid(), Support::E, rng);
    const GridDensity mp = random_density(model.e_grid(), Support::E, rng);
    const double lhs = tv_distance(field_update(eta, m, model).eta, field_update(etap, mp, model).eta);
    CHECK(lhs <= (1.0 - eps) * tv_distance(eta, etap) + eps * beta * tv_distance(m, mp) + 1e-10);
  }
}

TEST_CASE("phi step preserves normalisation") {
  const Model model = default_model();
  Rng rng(6);
  MeanFieldState s = random_state(model, rng);
  for (int k = 0; k < 10; ++k) {
    s = phi_step(s, model);
    CHECK(s.m.mass() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(s.eta.mass() == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(s.step == static_cast<std::size_t>(k + 1));
  }
}

TEST_CASE("contraction constants") {
  const Model model = default_model();
  const KernelBank& bank = model.bank();
  const double mpp = bank.derived.m_p_pprime, beta = bank.derived.beta_pprime, eq = bank.params.eps_q;

  SUBCASE("no interaction gives theta = s") {
    const ContractionConstants c = compute_constants(0.3, 0.0, bank);
    REQUIRE(c.feasible);
    CHECK(c.s == doctest::Approx(std::max(0.7, 1.0 - eq + 0.3 * beta)));
    CHECK(c.theta == doctest::Approx(c.s).epsilon(1e-14));
    CHECK(c.kappa == 0.0);
  }
  SUBCASE("strong interaction is infeasible") {
    CHECK_FALSE(compute_constants(0.3, 1.0, bank).feasible);
    CHECK_FALSE(compute_constants(0.3, 1.0 / (4.0 * mpp), bank).feasible);
  }
  SUBCASE("closed-form root agrees with bisection") {
    for (double eps : {0.2, 0.3, 0.45}) {
      for (double lambda : {0.001, 0.01, 0.02}) {
        const ContractionConstants c = compute_constants(eps, lambda, bank);
        if (!c.feasible) continue;
        CHECK(c.theta == doctest::Approx(theta_by_bisection(c.s, lambda * mpp)).epsilon(1e-10));
        CHECK(c.s / c.theta + 4.0 * lambda * mpp / (c.theta * c.theta) <= 1.0 + 1e-12);
        CHECK(c.kappa == doctest::Approx(4.0 * lambda * mpp / c.theta));
      }
    }
  }
  SUBCASE("default values") {
    // Independent Python evaluation of the same closed forms (scipy brentq).
    const ContractionConstants c = compute_constants(0.3, 0.02, bank);
    REQUIRE(c.feasible);
    CHECK(mpp == doctest::Approx(1.9947114020071635).epsilon(1e-14));
    CHECK(beta == doctest::Approx(0.999996283203344).epsilon(1e-12));
    CHECK(c.theta == doctest::Approx(0.8811091339457203).epsilon(1e-12));
    CHECK(c.kappa == doctest::Approx(0.18110913394572029).epsilon(1e-12));
    CHECK(c.lambda0 == doctest::Approx(0.037599424119465).epsilon(1e-9));
    CHECK(c.eps0 == doctest::Approx(0.5130487431135916).epsilon(1e-9));
    CHECK(c.eps_min == doctest::Approx(0.15957691216057301).epsilon(1e-9));
  }
  SUBCASE("interval ends are feasibility boundaries") {
    const ContractionConstants c = compute_constants(0.3, 0.02, bank);
    CHECK(compute_constants(c.eps0 - 1e-9, 0.02, bank).feasible);
    CHECK_FALSE(compute_constants(c.eps0 + 1e-9, 0.02, bank).feasible);
    CHECK(compute_constants(c.eps_min + 1e-9, 0.02, bank).feasible);
    CHECK_FALSE(compute_constants(c.eps_min - 1e-9, 0.02, bank).feasible);
    CHECK_FALSE(compute_constants(0.3, c.lambda0 + 1e-9, bank).feasible);
  }
}

TEST_CASE("fixed point is unique and the iteration obeys the two-step recursion") {
  const Model model = default_model(128);
  const ContractionConstants c = compute_constants(model.eps(), model.lambda(), model.bank());
  REQUIRE(c.feasible);
  Rng rng(7);
  const double tol = 1e-10;
  const FixedPointResult a = fixed_point(random_state(model, rng), model, tol);
  const FixedPointResult b = fixed_point(initial_state(InitialCondition{}, model), model, tol);
  // Both limits sit within tol * (1 + kappa) / (1 - theta) of the fixed point.
  CHECK(pair_distance(a.state, b.state) < 2.0 * tol * (1.0 + c.kappa) / (1.0 - c.theta));
  for (const FixedPointResult* r : {&a, &b}) {
    const auto& al = r->trace;
    for (std::size_t k = 2; k < al.size(); ++k) {
      CHECK(al[k] + c.kappa * al[k - 1] <= c.theta * (al[k - 1] + c.kappa * al[k - 2]) + 1e-10);
    }
  }
  CHECK_THROWS_AS(fixed_point(random_state(model, rng), model, 1e-12, 3), ConvergenceError);
}

TEST_CASE("two trajectories approach each other geometrically") {
  const Model model = default_model(128);
  const ContractionConstants c = compute_constants(model.eps(), model.lambda(), model.bank());
  Rng rng(8);
  for (int pair = 0; pair < 5; ++pair) {
    MeanFieldState s = random_state(model, rng), t = random_state(model, rng);
    for (std::size_t n = 1; n <= 10; ++n) {
      s = phi_step(s, model);
      t = phi_step(t, model);
      CHECK(pair_distance(s, t) <= 4.0 * std::pow(c.theta, static_cast<double>(n) - 1.0) + 1e-10);
    }
  }
}

TEST_CASE("mixture field update weights and widths") {
  const Model model = default_model();
  const GaussianMixture eta = single_gaussian(1, at(0.7), 0.1);
  const EmpiricalMeasure m{1, {at(0.1), at(0.2), at(0.9), at(0.4)}};
  const GaussianMixture out = mixture_field_update(eta, m, model);
  REQUIRE(out.components.size() == 5);
  out.validate();
  CHECK(out.components[0].weight == doctest::Approx(0.7));
  CHECK(out.components[0].sigma == doctest::Approx(std::sqrt(0.01 + 0.04)));
  for (std::size_t j = 1; j < 5; ++j) {
    CHECK(out.components[j].weight == doctest::Approx(0.3 / 4));
    CHECK(out.components[j].sigma == doctest::Approx(0.2));
  }
}

TEST_CASE("initial condition") {
  const Model model = default_model();
  const MeanFieldState s = initial_state(InitialCondition{}, model);
  CHECK(s.m.mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.eta.mass() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.m.integrate([](const Point& p) { return p[0]; }) == doctest::Approx(0.3).epsilon(1e-3));
  Rng rng(9);
  for (int i = 0; i < 1000; ++i) CHECK(model.domain().contains(sample_m0(InitialCondition{}, model, rng)));
  InitialCondition flat;
  flat.m0_sigma = 0.0;
  CHECK(oscillation(initial_m(flat, model)) < 1e-12);
  const auto traj = meanfield_trajectory(s, model, 4);
  CHECK(traj.size() == 5);
  CHECK(traj.back().step == 4);
}
