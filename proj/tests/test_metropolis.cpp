#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "agentfield/experiments.hpp"
#include "agentfield/metropolis.hpp"
#include "support.hpp"

using namespace agentfield;
using agentfield::testing::default_model;

namespace {

PotentialField linear_field(const Model& model, double slope) {
  GridDensity g = GridDensity::zeros(model.field_grid(), Support::FieldBox);
  for (std::size_t i = 0; i < g.size(); ++i) g.values()[i] = 3.0 + slope * model.field_grid().center(i)[0];
  return PotentialField(g);
}

PotentialField constant_field(const Model& model) {
  return PotentialField(GridDensity::uniform(model.field_grid(), Support::FieldBox));
}

GridDensity row_density(const GridOperator& op, std::size_t i) {
  std::vector<double> r = op.row(i);
  for (double& v : r) v /= op.grid().cell_volume();
  return {op.grid(), r, Support::E};
}

double grid_mean(const GridDensity& d) {
  return d.integrate([](const Point& p) { return p[0]; });
}

std::vector<double> coarse_cells(const GridDensity& d, std::size_t factor) {
  std::vector<double> out(d.size() / factor, 0.0);
  for (std::size_t i = 0; i < d.size(); ++i) out[i / factor] += d[i] * d.spec().cell_volume();
  return out;
}

}  // namespace

TEST_CASE("acceptance weight") {
  CHECK(accept_weight(0.3, 0.5, 4.0) == 1.0);
  CHECK(accept_weight(0.5, 0.5, 4.0) == 1.0);
  CHECK(accept_weight(0.9, 0.1, 0.0) == 1.0);
  CHECK(accept_weight(0.9, 0.1, 2.0) == doctest::Approx(std::exp(-1.6)));
  Rng rng(1);
  std::uniform_real_distribution<double> u(0.0, 5.0), l(0.0, 3.0);
  for (int i = 0; i < 1000; ++i) {
    const double a = u(rng), b = u(rng), ap = u(rng), bp = u(rng), lam = l(rng);
    CHECK(std::abs(accept_weight(a, b, lam) - accept_weight(ap, bp, lam)) <=
          lam * std::abs(a - ap) + lam * std::abs(b - bp) + 1e-15);
  }
}

TEST_CASE("constant potential gives the proposal law") {
  const Model model = default_model();
  const QGridOperator q(model.e_grid(), model.bank());
  const FunctionNet net = build_net(1.0, 1.0, 0.2, model.domain());
  const std::size_t cell = 77;
  const Point x = model.e_grid().center(cell);
  const GridDensity target = row_density(q, cell);
  Rng rng(4);
  for (const auto& [psi, lambda] : {std::pair{constant_field(model), 3.0}, std::pair{linear_field(model, 2.0), 0.0}}) {
    EmpiricalMeasure emp{1, std::vector<Point>(10000)};
    for (Point& p : emp.points) p = m_psi_sample(x, psi, lambda, model.bank(), model.domain(), rng);
    CHECK(net_distance(emp, target, net) <= 3.0 * 2.0 / std::sqrt(10000.0));
  }
  Rng gen(8);
  const GridDensity m = random_density(model.e_grid(), Support::E, gen);
  const GridDensity pushed = m_psi_pushforward(m, constant_field(model), 3.0, model.bank());
  CHECK(sup_distance(pushed, q.push(m)) < 1e-10);
}

TEST_CASE("increasing potential drifts agents uphill") {
  const Model model = default_model();
  const double lambda = 5.0;
  const PotentialField psi = linear_field(model, 1.0);
  const QGridOperator q(model.e_grid(), model.bank());
  const MetropolisGridOperator mp(model.e_grid(), psi.on_grid(model.e_grid()), lambda, model.bank());
  const std::size_t cell = 128;
  const Point x = model.e_grid().center(cell);
  const double oracle_mean = grid_mean(row_density(mp, cell));
  const double q_mean = grid_mean(row_density(q, cell));
  CHECK(oracle_mean > q_mean + 0.01);

  Rng rng(12);
  const std::size_t n = 20000;
  std::vector<double> diff(n);
  for (std::size_t i = 0; i < n; ++i) {
    Rng a = rng;
    const double up = m_psi_sample(x, psi, lambda, model.bank(), model.domain(), rng)[0];
    const double plain = q_sample(x, model.bank(), model.domain(), a)[0];
    diff[i] = up - plain;
  }
  const MeanSe d = mean_se(diff);
  CHECK(d.mean > 3.0 * d.se);
  CHECK(std::abs(d.mean - (oracle_mean - q_mean)) < 3.0 * d.se);
}

TEST_CASE("pushforward rows are probability vectors with inherited minorization") {
  const Model model = default_model();
  Rng rng(5);
  for (double lambda : {0.02, 2.0}) {
    const PotentialField psi(random_field(model, rng));
    const MetropolisGridOperator mp(model.e_grid(), psi.on_grid(model.e_grid()), lambda, model.bank());
    const double floor =
        model.bank().params.eps_q * std::exp(-lambda * psi.oscillation()) * model.e_grid().cell_volume() /
        model.domain().volume();
    for (std::size_t i = 0; i < model.e_grid().size(); i += 5) {
      const std::vector<double> r = mp.row(i);
      double sum = 0.0;
      for (double v : r) {
        sum += v;
        CHECK(v >= floor - 1e-15);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-8));
    }
    std::vector<double> f(model.e_grid().size());
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (double& v : f) v = u(rng);
    for (double v : mp.apply_function(f)) CHECK(std::abs(v) <= 1.0 + 1e-12);
  }
}

TEST_CASE("pushforward contracts total variation") {
  const Model model = default_model();
  Rng rng(6);
  for (int field = 0; field < 5; ++field) {
    const PotentialField psi(random_field(model, rng));
    const double lambda = field % 2 ? 2.0 : 0.02;
    const double factor = 1.0 - model.bank().params.eps_q * std::exp(-lambda * psi.oscillation());
    for (int pair = 0; pair < 50; ++pair) {
      const GridDensity m = random_density(model.e_grid(), Support::E, rng);
      const GridDensity mp = random_density(model.e_grid(), Support::E, rng);
      const double before = tv_distance(m, mp);
      const double after = tv_distance(m_psi_pushforward(m, psi, lambda, model.bank()),
                                       m_psi_pushforward(mp, psi, lambda, model.bank()));
      CHECK(after <= factor * before + 1e-10);
    }
  }
}

TEST_CASE("sampler agrees with the grid pushforward") {
  const Model model = default_model();
  Rng rng(7);
  const std::size_t n = 100000, factor = 4;
  for (int field = 0; field < 5; ++field) {
    const PotentialField psi(random_field(model, rng));
    const double lambda = 1.0;
    const GridDensity m = random_density(model.e_grid(), Support::E, rng);
    std::vector<double> w(m.values().begin(), m.values().end());
    std::discrete_distribution<std::size_t> start(w.begin(), w.end());
    std::vector<Point> ys(n);
    for (Point& y : ys) {
      y = m_psi_sample(model.e_grid().center(start(rng)), psi, lambda, model.bank(), model.domain(), rng);
    }
    const auto expected = coarse_cells(m_psi_pushforward(m, psi, lambda, model.bank()), factor);
    CHECK(agentfield::testing::max_z(agentfield::testing::histogram(ys, 0.0, 1.0, expected.size()), expected, n) < agentfield::testing::cell_z_limit(expected.size()));
  }
}

TEST_CASE("Lipschitz bound of the Metropolis kernel") {
  const Model model = default_model();
  const KernelBank& bank = model.bank();
  CHECK(m_psi_lipschitz_bound(bank, 0.0, 5.0) == doctest::Approx(3.0 * bank.derived.l_q_q0));

  // A field after one update is l-bar Lipschitz.
  Rng rng(10);
  const MeanFieldState s = phi_step(random_state(model, rng), model);
  const GridSpec& fg = model.field_grid();
  double field_slope = 0.0;
  for (std::size_t i = 0; i + 1 < fg.size(); ++i) {
    field_slope = std::max(field_slope, std::abs(s.eta[i + 1] - s.eta[i]) / fg.step[0]);
  }
  CHECK(field_slope <= bank.derived.lbar_p_pprime);

  const double lambda = 2.0;
  const PotentialField psi(s.eta);
  const MetropolisGridOperator mp(model.e_grid(), psi.on_grid(model.e_grid()), lambda, bank);
  const double bound = m_psi_lipschitz_bound(bank, lambda, bank.derived.lbar_p_pprime);
  const FunctionNet net = build_net(1.0, 1.0, 0.25, model.domain());
  const GridSpec& eg = model.e_grid();
  for (std::size_t k = 0; k < net.size(); k += 3) {
    std::vector<double> f(eg.size());
    for (std::size_t i = 0; i < eg.size(); ++i) f[i] = net.eval(k, eg.center(i));
    const std::vector<double> g = mp.apply_function(f);
    for (std::size_t i = 0; i + 1 < g.size(); ++i) CHECK(std::abs(g[i + 1] - g[i]) / eg.step[0] <= bound);
  }
}
