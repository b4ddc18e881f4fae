#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "agentfield/agents.hpp"
#include "agentfield/artifacts.hpp"
#include "agentfield/config.hpp"
#include "agentfield/experiments.hpp"
#include "agentfield/meanfield.hpp"
#include "agentfield/scheme.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace agentfield;

namespace {

struct Context {
  std::string command;
  RunConfig config;
  std::string config_text;  // verbatim input, empty when running on defaults
  std::vector<std::string> warnings;
  fs::path dir;
};

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << content;
}

json derived_json(const KernelBank& bank) {
  const DerivedConstants& d = bank.derived;
  return {{"m_p", d.m_p},           {"m_pprime", d.m_pprime},   {"m_p_pprime", d.m_p_pprime},
          {"mbar_p", d.mbar_p},     {"mbar_p_pprime", d.mbar_p_pprime}, {"l_p", d.l_p},
          {"l_pprime", d.l_pprime}, {"lbar_p_pprime", d.lbar_p_pprime}, {"m_q", d.m_q},
          {"m_q0", d.m_q0},         {"m_q_q0", d.m_q_q0},       {"l_q", d.l_q},
          {"l_q0", d.l_q0},         {"l_q_q0", d.l_q_q0},       {"alpha_pprime", d.alpha_pprime},
          {"delta_pprime", d.delta_pprime}, {"beta_pprime", d.beta_pprime}};
}

json constants_json(const Model& model) {
  const ContractionConstants c = compute_constants(model.eps(), model.lambda(), model.bank());
  json cj = {{"feasible", c.feasible}, {"eps", c.eps}, {"lambda", c.lambda}, {"s", c.s},
             {"eps_q", c.eps_q}, {"beta_pprime", c.beta_pprime}, {"m_p_pprime", c.m_p_pprime},
             {"eps0", c.eps0}, {"eps_min", c.eps_min}, {"lambda0", c.lambda0}};
  if (c.feasible) {
    cj["theta"] = c.theta;
    cj["kappa"] = c.kappa;
  }
  return {{"contraction", cj}, {"kernels", derived_json(model.bank())}};
}

// Creates the run directory with the config copies, metadata and schema.
void open_run(Context& ctx, const Model& model, const std::vector<std::string>& files) {
  fs::create_directories(ctx.dir);
  const std::string effective = render_config(ctx.config);
  write_file(ctx.dir / "config.ini", ctx.config_text.empty() ? effective : ctx.config_text);
  write_file(ctx.dir / "effective_config.ini", effective);
  write_file(ctx.dir / "schema.json", csv_schema().dump(1) + "\n");
  json meta = {{"command", ctx.command},
               {"seed", ctx.config.seed},
               {"config_hash", config_hash(ctx.config)},
               {"constants", constants_json(model)},
               {"warnings", ctx.warnings},
               {"files", files}};
  write_file(ctx.dir / "metadata.json", meta.dump(1) + "\n");
}

void write_artifacts(Context& ctx, const Model& model, const Artifacts& a) {
  std::vector<std::string> names;
  for (const auto& [name, content] : a) names.push_back(name);
  open_run(ctx, model, names);
  for (const auto& [name, content] : a) write_file(ctx.dir / name, content);
}

int cmd_constants(Context& ctx) {
  const Model model = make_model(ctx.config);
  const json c = constants_json(model);
  write_artifacts(ctx, model, {{"constants.json", c.dump(1) + "\n"}});
  std::cout << c.dump(1) << "\n";
  return 0;
}

int cmd_agents(Context& ctx) {
  const Model model = make_model(ctx.config);
  const auto snaps = run_system(model, ctx.config.init, system_options(ctx.config));
  write_artifacts(ctx, model, agent_artifacts(snaps, model));
  std::cout << "agents: " << ctx.config.n_agents << ", steps: " << ctx.config.horizon << ", snapshots: " << snaps.size()
            << "\n";
  return 0;
}

int cmd_scheme(Context& ctx) {
  const Model model = make_model(ctx.config);
  const auto snaps = run_scheme(model, ctx.config.init, system_options(ctx.config));
  write_artifacts(ctx, model, scheme_artifacts(snaps, model));
  std::cout << "agents: " << ctx.config.n_agents << ", steps: " << ctx.config.horizon << ", snapshots: " << snaps.size()
            << "\n";
  return 0;
}

int cmd_meanfield(Context& ctx) {
  const Model model = make_model(ctx.config);
  const auto traj = meanfield_trajectory(initial_state(ctx.config.init, model), model, ctx.config.horizon);
  write_artifacts(ctx, model, meanfield_artifacts(traj));
  std::cout << "steps: " << ctx.config.horizon << ", osc(eta_n): " << format_double(oscillation(traj.back().eta))
            << "\n";
  return 0;
}

int cmd_fixed_point(Context& ctx) {
  const Model model = make_model(ctx.config);
  const ContractionConstants c = compute_constants(model.eps(), model.lambda(), model.bank());
  try {
    const FixedPointResult fp =
        fixed_point(initial_state(ctx.config.init, model), model, ctx.config.fp_tol, ctx.config.fp_max_iter);
    write_artifacts(ctx, model, fixed_point_artifacts(fp, c));
    std::cout << "converged in " << fp.iterations << " iterations, last step "
              << format_double(fp.trace.empty() ? 0.0 : fp.trace.back()) << "\n";
    return 0;
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << " (last step " << format_double(e.last_error()) << ")\n";
    return 1;
  }
}

int cmd_verify(Context& ctx, const std::vector<std::string>& requested) {
  std::vector<std::string> names = requested;
  if (names.empty()) names = ctx.config.checks;
  if (names.empty() || std::find(names.begin(), names.end(), "all") != names.end()) {
    names.clear();
    for (const CheckInfo& c : check_catalog()) names.push_back(c.name);
  }
  std::vector<const CheckInfo*> selected;
  for (const std::string& n : names) selected.push_back(&find_check(n));

  const Setup setup = make_setup(ctx.config);
  std::vector<CheckReport> reports;
  Artifacts files;
  for (const CheckInfo* info : selected) {
    std::cerr << "running " << info->name << " ..." << std::endl;
    CheckReport r = run_check(*info, setup);
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << " (" << std::fixed << std::setprecision(1) << r.seconds
              << " s)" << std::endl;
    for (const auto& [tname, table] : r.tables) files[r.name + "_" + tname + ".csv"] = table_csv(table);
    reports.push_back(std::move(r));
  }
  const json report = emit_report(reports, ctx.config.seed, config_hash(ctx.config));
  files["report.json"] = report.dump(1) + "\n";
  write_artifacts(ctx, setup.model, files);
  return report.at("passed").get<bool>() ? 0 : 1;
}

fs::path output_root(const std::string& flag, const RunConfig& c) {
  if (!flag.empty()) return flag;
  if (!c.output_dir.empty()) return c.output_dir;
  if (const char* env = std::getenv("AGENTFIELD_OUT"); env != nullptr && *env != '\0') return env;
  return "runs";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Agents interacting through a potential field: simulation and verification"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_flag;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> parallel;
  app.add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed (overrides run.seed)");
  app.add_option("--out", out_flag, "output root (default: output.dir, $AGENTFIELD_OUT, ./runs)");
  app.add_option("--parallel", parallel, "worker threads (overrides run.parallel)")->check(CLI::PositiveNumber);

  std::vector<std::string> check_names;
  auto* constants = app.add_subcommand("constants", "kernel and contraction constants");
  auto* agents = app.add_subcommand("simulate-agents", "run the N-agent system");
  auto* scheme = app.add_subcommand("simulate-scheme", "run the Gaussian-mixture particle scheme");
  auto* meanfield = app.add_subcommand("meanfield-iterate", "iterate the mean-field map run.horizon times");
  auto* fixed = app.add_subcommand("fixed-point", "iterate the mean-field map to its fixed point");
  auto* verify = app.add_subcommand("verify", "run numerical checks (names or 'all')");
  verify->add_option("checks", check_names, "check names; default experiments.checks or all");
  auto* list = app.add_subcommand("list-checks", "print the available checks");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const CheckInfo& c : check_catalog()) std::cout << c.name << "  " << c.summary << "\n";
    return 0;
  }

  Context ctx;
  try {
    LoadedConfig loaded = config_path.empty() ? parse_config("") : load_config(config_path);
    if (!config_path.empty()) {
      std::ifstream in(config_path, std::ios::binary);
      std::ostringstream ss;
      ss << in.rdbuf();
      ctx.config_text = ss.str();
    }
    ctx.config = loaded.config;
    ctx.warnings = loaded.warnings;
    if (seed) ctx.config.seed = *seed;
    if (parallel) ctx.config.parallel = *parallel;
    for (const std::string& w : ctx.warnings) std::cerr << "warning: " << w << "\n";

    CLI::App* sub = app.get_subcommands().front();
    ctx.command = sub->get_name();
    ctx.dir = output_root(out_flag, ctx.config) / (ctx.command + "_" + config_hash(ctx.config).substr(0, 12));

    int rc = 0;
    if (sub == constants) rc = cmd_constants(ctx);
    if (sub == agents) rc = cmd_agents(ctx);
    if (sub == scheme) rc = cmd_scheme(ctx);
    if (sub == meanfield) rc = cmd_meanfield(ctx);
    if (sub == fixed) rc = cmd_fixed_point(ctx);
    if (sub == verify) rc = cmd_verify(ctx, check_names);
    std::cerr << "output: " << ctx.dir.string() << "\n";
    return rc;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
