#pragma once

#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "agentfield/agents.hpp"
#include "agentfield/meanfield.hpp"
#include "agentfield/scheme.hpp"

namespace agentfield {

/// Numeric table written as one CSV file.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

std::string table_csv(const Table& t);

/// Output files of one run, keyed by file name. Rendering is deterministic,
/// so equal maps mean byte-identical files.
using Artifacts = std::map<std::string, std::string>;

/// agents_positions.csv, agents_field.csv (field snapshots on the field grid).
Artifacts agent_artifacts(const std::vector<AgentSnapshot>& snaps, const Model& model);
/// scheme_positions.csv, scheme_field.json (mixtures), scheme_field.csv (rasterised).
Artifacts scheme_artifacts(const std::vector<SchemeSnapshot>& snaps, const Model& model);
/// meanfield_m.csv, meanfield_eta.csv, meanfield_steps.csv.
Artifacts meanfield_artifacts(const std::vector<MeanFieldState>& traj);
/// fixed_point_trace.csv, fixed_point_m.csv, fixed_point_eta.csv.
Artifacts fixed_point_artifacts(const FixedPointResult& fp, const ContractionConstants& c);

/// Column descriptions for every CSV file the tools write.
nlohmann::json csv_schema();

}  // namespace agentfield
