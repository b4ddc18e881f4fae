#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"

#include "agentfield/config.hpp"
#include "agentfield/experiments.hpp"
#include "support.hpp"

using namespace agentfield;
using agentfield::testing::default_model;

namespace {

Setup small_setup(std::uint64_t seed = 1) {
  const Model model = default_model(64);
  return Setup{model, InitialCondition{}, build_net(1.0, 1.0, 0.2, model.domain()), seed, 1};
}

}  // namespace

TEST_CASE("statistics helpers") {
  const MeanSe m = mean_se({1.0, 2.0, 3.0, 4.0});
  CHECK(m.mean == doctest::Approx(2.5));
  CHECK(m.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CHECK(ls_slope({1, 2, 3, 4}, {2.0, 2.9, 4.2, 4.9}) == doctest::Approx(1.0).epsilon(1e-12));
  // scipy.stats.ttest_1samp(..., alternative="greater").
  CHECK(one_sided_p({0.3, -0.1, 0.5, 0.2, 0.4}) == doctest::Approx(0.032492955171060336).epsilon(1e-10));
  CHECK(one_sided_p({1.0}) == 1.0);
}

TEST_CASE("random inputs are probability densities") {
  const Model model = default_model();
  Rng rng(4);
  for (int i = 0; i < 30; ++i) {
    const GridDensity d = random_density(model.e_grid(), Support::E, rng);
    CHECK(d.mass() == doctest::Approx(1.0).epsilon(1e-12));
    const GridDensity f = random_field(model, rng);
    CHECK(f.mass() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(f.spec() == model.field_grid());
    for (double v : f.values()) CHECK(v >= 0.0);
  }
}

TEST_CASE("check seeds depend only on the master seed and the name") {
  CHECK(check_seed(1, "mc-bound") == check_seed(1, "mc-bound"));
  CHECK(check_seed(1, "mc-bound") != check_seed(2, "mc-bound"));
  CHECK(check_seed(1, "mc-bound") != check_seed(1, "dobrushin"));
}

TEST_CASE("Monte-Carlo bound") {
  const Setup s = small_setup();
  const CheckReport r = check_mc_bound(s, {{100}, 50});
  CHECK(r.passed);
  CHECK(r.metrics["bound"][0].get<double>() == doctest::Approx(0.2 + 2 * 0.2));
  CHECK(r.tables.at("errors").rows.size() == 50);

  // Resampling a point mass returns the point mass.
  const EmpiricalMeasure atom{1, {agentfield::testing::at(0.42)}};
  Rng rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, atom.size() - 1);
  EmpiricalMeasure draws{1, std::vector<Point>(100)};
  for (Point& p : draws.points) p = atom.points[pick(rng)];
  CHECK(net_distance(draws, atom, s.net) < 1e-12);
}

TEST_CASE("contraction checks pass on small runs") {
  const Setup s = small_setup();
  CHECK(check_dobrushin(s, {{0.1, 0.7}, 20, 1e-10}).passed);
  CHECK(check_metropolis_contraction(s, {{2.0}, 2, 10, 1e-10}).passed);
  CHECK(check_two_trajectory(s, {3, {2, 5}, 1e-10}).passed);
}

TEST_CASE("tightness") {
  const Setup s = small_setup();
  CHECK(check_tightness(s, {1.0, 5, 10, 2}).passed);
  CHECK(tightness_radius(s.model, s.ic, 1e-3) > tightness_radius(s.model, s.ic, 1e-1));
  CHECK(std::isinf(tightness_radius(s.model.with(0.0, 0.02), s.ic, 1e-3)));
}

TEST_CASE("catalog and lookup") {
  const auto& cat = check_catalog();
  CHECK(cat.size() >= 8);
  std::set<std::string> names;
  for (const CheckInfo& c : cat) names.insert(c.name);
  CHECK(names.size() == cat.size());
  CHECK(find_check("dobrushin").name == "dobrushin");
  CHECK_THROWS_AS(find_check("no-such-check"), ConfigError);
}

TEST_CASE("report json") {
  const Setup s = small_setup();
  const nlohmann::json empty = emit_report({}, 1, "abc");
  CHECK(empty["checks"].empty());
  CHECK(empty["passed"].get<bool>());

  const CheckReport r = check_mc_bound(s, {{25}, 10});
  const nlohmann::json one = emit_report({r}, 1, "abc");
  REQUIRE(one["checks"].size() == 1);
  CHECK(one["checks"][0]["name"] == "mc-bound");
  CHECK(one["config_hash"] == "abc");
  CHECK(one["checks"][0].contains("seed"));

  const CheckReport again = check_mc_bound(s, {{25}, 10});
  CHECK(emit_report({again}, 1, "abc").dump() == one.dump());
  CheckReport failed;
  failed.name = "x";
  CHECK_FALSE(emit_report({r, failed}, 1, "abc")["passed"].get<bool>());
}

TEST_CASE("determinism check") {
  CHECK(check_determinism(small_setup(), {20, 3, 3}).passed);
}

TEST_CASE("tightness at the defaults over 200 steps") {
  const Setup s = make_setup(parse_config("").config);
  const CheckReport r = check_tightness(s);
  CHECK(r.passed);
  CHECK(r.metrics.contains("radius"));
}
