// Acceptance gate: one PASS/FAIL line per criterion. A criterion passes when
// its check passes at the default configuration within its runtime budget.
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <string>
#include <vector>

#include "agentfield/config.hpp"
#include "agentfield/experiments.hpp"

using namespace agentfield;

namespace {

struct Criterion {
  int id;
  const char* title;
  const char* check;
  double budget_seconds;
};

const std::vector<Criterion> kCriteria = {
    {1, "Monte-Carlo bound", "mc-bound", 10.0},
    {2, "Dobrushin contraction of Q", "dobrushin", 5.0},
    {3, "Metropolis kernel contraction", "metropolis-contraction", 30.0},
    {4, "unique fixed point and two-step recursion", "fixed-point", 120.0},
    {5, "two-trajectory bound", "two-trajectory", 60.0},
    {6, "finite-horizon convergence of the agents", "finite-horizon-agents", 300.0},
    {7, "finite-horizon convergence of the scheme", "finite-horizon-scheme", 300.0},
    {8, "uniform-in-time error", "uniform-in-time", 600.0},
    {9, "commuting limits", "commuting-limits", 600.0},
    {10, "propagation of chaos", "propagation-of-chaos", 600.0},
    {11, "determinism", "determinism", 60.0},
};

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));

  const RunConfig config = parse_config("").config;
  const Setup setup = make_setup(config);
  const ContractionConstants c = compute_constants(setup.model.eps(), setup.model.lambda(), setup.model.bank());
  std::printf("default config %s: eps %.3g, lambda %.3g, theta %.6f, feasible %s\n", config_hash(config).c_str(),
              c.eps, c.lambda, c.theta, c.feasible ? "yes" : "no");

  std::vector<CheckReport> reports;
  int failed = 0;
  for (const Criterion& cr : kCriteria) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), cr.id) == wanted.end()) continue;
    CheckReport r = run_check(find_check(cr.check), setup);
    const bool in_time = r.seconds < cr.budget_seconds;
    const bool ok = r.passed && in_time && c.feasible;
    failed += ok ? 0 : 1;
    std::printf("%s %2d %-44s check %-6s %7.1f s (budget %.0f s)\n", ok ? "PASS" : "FAIL", cr.id, cr.title,
                r.passed ? "passed" : "failed", r.seconds, cr.budget_seconds);
    std::fflush(stdout);
    reports.push_back(std::move(r));
  }
  std::ofstream("acceptance_report.json") << emit_report(reports, config.seed, config_hash(config)).dump(1) << "\n";
  std::printf("%d of %zu criteria failed\n", failed, reports.size());
  return failed == 0 ? 0 : 1;
}
