#include "agentfield/artifacts.hpp"

#include <sstream>

namespace agentfield {

namespace {

void header(std::ostringstream& os, const char* lead, std::size_t dim, const char* tail) {
  os << lead;
  for (std::size_t a = 0; a < dim; ++a) os << ",x" << a;
  if (tail != nullptr) os << ',' << tail;
  os << '\n';
}

void density_rows(std::ostringstream& os, std::size_t k, const GridDensity& g) {
  const GridSpec& s = g.spec();
  for (std::size_t i = 0; i < g.size(); ++i) {
    const Point c = s.center(i);
    os << k << ',' << i;
    for (std::size_t a = 0; a < s.dim; ++a) os << ',' << format_double(c[a]);
    os << ',' << format_double(g[i]) << '\n';
  }
}

void position_rows(std::ostringstream& os, std::size_t k, const EmpiricalMeasure& m) {
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    os << k << ',' << i;
    for (std::size_t a = 0; a < m.dim; ++a) os << ',' << format_double(m.points[i][a]);
    os << '\n';
  }
}

}  // namespace

std::string table_csv(const Table& t) {
  std::ostringstream os;
  for (std::size_t c = 0; c < t.columns.size(); ++c) os << (c ? "," : "") << t.columns[c];
  os << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) os << (c ? "," : "") << format_double(row[c]);
    os << '\n';
  }
  return os.str();
}

Artifacts agent_artifacts(const std::vector<AgentSnapshot>& snaps, const Model& model) {
  const std::size_t dim = model.domain().dim;
  std::ostringstream pos, field;
  header(pos, "k,agent", dim, nullptr);
  header(field, "k,cell", dim, "density");
  for (const AgentSnapshot& s : snaps) {
    position_rows(pos, s.k, s.positions);
    density_rows(field, s.k, field_on_grid(s.field, model));
  }
  return {{"agents_positions.csv", pos.str()}, {"agents_field.csv", field.str()}};
}

Artifacts scheme_artifacts(const std::vector<SchemeSnapshot>& snaps, const Model& model) {
  const std::size_t dim = model.domain().dim;
  std::ostringstream pos, field;
  header(pos, "k,agent", dim, nullptr);
  header(field, "k,cell", dim, "density");
  nlohmann::json mixtures = nlohmann::json::array();
  for (const SchemeSnapshot& s : snaps) {
    position_rows(pos, s.k, s.positions);
    density_rows(field, s.k, rasterize(s.field, model.field_grid(), Support::FieldBox).density);
    mixtures.push_back({{"k", s.k}, {"mixture", to_json(s.field)}});
  }
  return {{"scheme_positions.csv", pos.str()},
          {"scheme_field.csv", field.str()},
          {"scheme_field.json", mixtures.dump(1) + "\n"}};
}

Artifacts meanfield_artifacts(const std::vector<MeanFieldState>& traj) {
  if (traj.empty()) return {};
  std::ostringstream m, eta, steps;
  header(m, "k,cell", traj.front().m.spec().dim, "density");
  header(eta, "k,cell", traj.front().eta.spec().dim, "density");
  steps << "k,osc_eta,step_distance\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    const MeanFieldState& s = traj[i];
    density_rows(m, s.step, s.m);
    density_rows(eta, s.step, s.eta);
    steps << s.step << ',' << format_double(oscillation(s.eta)) << ',';
    if (i > 0) steps << format_double(pair_distance(traj[i - 1], s));
    steps << '\n';
  }
  return {{"meanfield_m.csv", m.str()}, {"meanfield_eta.csv", eta.str()}, {"meanfield_steps.csv", steps.str()}};
}

Artifacts fixed_point_artifacts(const FixedPointResult& fp, const ContractionConstants& c) {
  std::ostringstream trace, m, eta;
  trace << "k,alpha,ratio\n";
  for (std::size_t k = 0; k < fp.trace.size(); ++k) {
    trace << k << ',' << format_double(fp.trace[k]) << ',';
    if (k >= 2 && c.feasible) {
      const double prev = fp.trace[k - 1] + c.kappa * fp.trace[k - 2];
      if (prev > 0.0) trace << format_double((fp.trace[k] + c.kappa * fp.trace[k - 1]) / prev);
    }
    trace << '\n';
  }
  header(m, "k,cell", fp.state.m.spec().dim, "density");
  header(eta, "k,cell", fp.state.eta.spec().dim, "density");
  density_rows(m, fp.state.step, fp.state.m);
  density_rows(eta, fp.state.step, fp.state.eta);
  return {{"fixed_point_trace.csv", trace.str()},
          {"fixed_point_m.csv", m.str()},
          {"fixed_point_eta.csv", eta.str()}};
}

nlohmann::json csv_schema() {
  using nlohmann::json;
  const json density = {{"k", "step index"},
                        {"cell", "flat cell index, last axis fastest"},
                        {"x<a>", "cell centre coordinate on axis a"},
                        {"density", "density value at the cell centre"}};
  const json positions = {{"k", "step index"}, {"agent", "agent index"}, {"x<a>", "coordinate on axis a"}};
  return {
      {"agents_positions.csv", positions},
      {"agents_field.csv", density},
      {"scheme_positions.csv", positions},
      {"scheme_field.csv", density},
      {"meanfield_m.csv", density},
      {"meanfield_eta.csv", density},
      {"meanfield_steps.csv",
       {{"k", "step index"},
        {"osc_eta", "max - min of the field values"},
        {"step_distance", "tv(m_k, m_{k-1}) + tv(eta_k, eta_{k-1}); empty at k = 0"}}},
      {"fixed_point_trace.csv",
       {{"k", "iteration"},
        {"alpha", "tv(m_k, m_{k+1}) + tv(eta_k, eta_{k+1})"},
        {"ratio", "(alpha_k + kappa alpha_{k-1}) / (alpha_{k-1} + kappa alpha_{k-2}); empty for k < 2"}}},
      {"fixed_point_m.csv", density},
      {"fixed_point_eta.csv", density},
      {"<check>_<table>.csv", {{"*", "per-check data; columns are listed in the check's report entry"}}},
  };
}

}  // namespace agentfield
