#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "delaysync/analysis.hpp"
#include "delaysync/ddesim.hpp"
#include "delaysync/netgraph.hpp"
#include "delaysync/protocols.hpp"

namespace delaysync {

enum class ScenarioMode { StaticFullState, DynamicPartialState, Heterogeneous };

std::string_view to_string(ScenarioMode mode);

enum class HistoryPolicy { Constant, Ramp };

enum class FrameSelection { Delayed, Transformed, Both };

/// Everything a run needs. Agent indices are zero-based here; the text format
/// is one-based.
struct Scenario {
  ScenarioMode mode = ScenarioMode::StaticFullState;
  /// One model for homogeneous modes, one per agent (root first) otherwise.
  std::vector<AgentModel> agents;

  Matrix weights;
  double beta = 0.0;
  std::optional<double> alpha;
  std::map<EdgeKey, double> delays;  // (child, parent)

  std::optional<Matrix> Q_design;  // default identity
  std::optional<double> rho;
  double delta_init = 1.0;
  double epsilon_init = 1.0;
  std::optional<int> nbar;
  std::optional<Matrix> K;

  double step = 0.01;
  double horizon = 10.0;
  int stride = 1;
  HistoryPolicy history = HistoryPolicy::Constant;
  FrameSelection frames = FrameSelection::Both;
  PairMode pairs = PairMode::TreeEdges;

  std::vector<Vector> initial_states;      // plant states, one per agent
  std::vector<Vector> controller_states;   // dynamic mode; empty means zero
  std::vector<Vector> history_slopes;      // ramp history; one per agent

  SyncTolerances tolerances;

  bool operator==(const Scenario& other) const;
};

/// Throws ParseError with "line N, field 'key': ..." diagnostics.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical text form; parse_scenario(serialize_scenario(s)) == s.
std::string serialize_scenario(const Scenario& scenario);

}  // namespace delaysync
