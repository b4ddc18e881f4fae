#include <algorithm>
#include <string>

#include "doctest.h"

#include "agentfield/config.hpp"

using namespace agentfield;

namespace {

std::vector<std::string> problems_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigValidationError& e) {
    return e.problems();
  }
  return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& key) {
  return std::any_of(problems.begin(), problems.end(),
                     [&](const std::string& p) { return p.rfind(key + ":", 0) == 0; });
}

}  // namespace

TEST_CASE("empty and minimal files give the defaults") {
  const LoadedConfig empty = parse_config("");
  CHECK(empty.warnings.empty());
  const RunConfig& c = empty.config;
  CHECK(c.dim == 1);
  CHECK(c.eps == 0.3);
  CHECK(c.lambda == 0.02);
  CHECK(c.effective_cells() == 256);
  CHECK(c.effective_margin() == doctest::Approx(2.0));
  CHECK(c.n_agents == 100);
  const LoadedConfig minimal = parse_config("[run]\nn_agents = 40\n");
  CHECK(minimal.config.n_agents == 40);
  CHECK(minimal.config.horizon == c.horizon);
  CHECK(parse_config("[domain]\ndim = 2\n").config.effective_cells() == 64);
}

TEST_CASE("invalid values name their key") {
  CHECK(mentions(problems_of("[dynamics]\neps = 1.5\n"), "dynamics.eps"));
  CHECK(mentions(problems_of("[dynamics]\nlambda = -1\n"), "dynamics.lambda"));
  CHECK(mentions(problems_of("[run]\nn_agents = 0\n"), "run.n_agents"));
  CHECK(mentions(problems_of("[kernels]\neps_q = 1\n"), "kernels.eps_q"));
  CHECK(mentions(problems_of("[kernels]\np_sigma = abc\n"), "kernels.p_sigma"));
  CHECK(mentions(problems_of("[domain]\nlower = 1\nupper = 0\n"), "domain.upper"));
}

TEST_CASE("every problem is reported at once") {
  const auto p = problems_of("[dynamics]\neps = 2\nlambda = -3\n[run]\nhorizon = x\n[bogus]\na = 1\n");
  CHECK(p.size() >= 4);
  CHECK(mentions(p, "dynamics.eps"));
  CHECK(mentions(p, "dynamics.lambda"));
  CHECK(mentions(p, "run.horizon"));
}

TEST_CASE("unknown keys and sections are errors") {
  CHECK_FALSE(problems_of("[run]\nn_agent = 5\n").empty());
  CHECK_FALSE(problems_of("[runs]\nn_agents = 5\n").empty());
  CHECK_THROWS_AS(parse_config("[run\n"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/agentfield.ini"), ConfigError);
}

TEST_CASE("outside the contraction region is only a warning") {
  const LoadedConfig c = parse_config("[dynamics]\nlambda = 0.5\n");
  CHECK(c.warnings.size() == 1);
  CHECK(c.config.lambda == 0.5);
}

TEST_CASE("rendering round-trips and hashes ignore threads") {
  const RunConfig c = parse_config("[dynamics]\neps = 0.25\n[run]\nseed = 9\nsnapshots = 0, 5\n[init]\nm0_center = 0.4\n")
                          .config;
  const RunConfig back = parse_config(render_config(c)).config;
  CHECK(render_config(back) == render_config(c));
  CHECK(config_hash(back) == config_hash(c));
  CHECK(config_hash(c).size() == 16);
  RunConfig threaded = c;
  threaded.parallel = 8;
  CHECK(config_hash(threaded) == config_hash(c));
  RunConfig other = c;
  other.seed = 10;
  CHECK(config_hash(other) != config_hash(c));
}

TEST_CASE("model and setup follow the config") {
  const RunConfig c = parse_config("[dynamics]\neps = 0.4\nlambda = 0\n[grid]\ncells = 32\n[net]\ndelta = 0.5\n").config;
  const Model m = make_model(c);
  CHECK(m.eps() == 0.4);
  CHECK(m.e_grid().cells[0] == 32);
  const ContractionConstants k = compute_constants(m.eps(), m.lambda(), m.bank());
  CHECK(k.theta == doctest::Approx(std::max(0.6, 1.0 - 0.7 + 0.4 * m.bank().derived.beta_pprime)));
  const Setup s = make_setup(c);
  CHECK(s.net.size() == 35);
  CHECK(system_options(c).n_agents == c.n_agents);
}
