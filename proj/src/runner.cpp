#include "delaysync/runner.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "delaysync/error.hpp"
#include "delaysync/textio.hpp"

namespace delaysync {
namespace {

struct Network {
  SpanningTreeNetwork tree;
  DelayAssignment delays;
};

Network build_network(const Scenario& sc) {
  const Matrix L = build_laplacian(WeightedDigraph(sc.weights));
  SpanningTreeNetwork tree = validate_spanning_tree(L, sc.beta, sc.alpha);
  DelayAssignment delays = cumulative_root_delays(tree, sc.delays);
  return {std::move(tree), std::move(delays)};
}

struct Synthesis {
  std::optional<StaticProtocol> static_protocol;
  std::optional<DynamicProtocol> dynamic_protocol;
  std::optional<HeteroDesign> hetero;
  std::vector<SpectralCertificate> certificates;
  std::string dump;
};

void put(std::ostringstream& os, const std::string& key, const std::string& value) {
  os << key << " = " << value << '\n';
}

Synthesis synthesize(const Scenario& sc, const Network& net) {
  Synthesis syn;
  std::ostringstream os;
  put(os, "mode", std::string(to_string(sc.mode)));
  put(os, "agents", std::to_string(net.tree.size()));
  put(os, "beta", format_double(net.tree.beta()));
  if (net.tree.alpha()) put(os, "alpha", format_double(*net.tree.alpha()));
  put(os, "root_delays", format_vector(net.delays.root_delays));

  switch (sc.mode) {
    case ScenarioMode::StaticFullState: {
      const AgentModel& a = sc.agents.front();
      a.validate();
      const Matrix Q = sc.Q_design.value_or(Matrix::Identity(a.n(), a.n()));
      const StaticProtocol proto = design_static_full_state(a.A, a.B, net.tree.beta(), Q, sc.rho);
      put(os, "rho", format_double(proto.rho));
      put(os, "P", format_matrix(proto.P));
      put(os, "F", format_matrix(proto.F));
      put(os, "Q_design", format_matrix(proto.Q_design));
      for (int i : net.tree.children_in_order()) {
        const double ell = net.tree.diagonal(i);
        const LyapunovCheck lc = lyapunov_inequality_check(a.A, a.B, proto.P, proto.Q_design, ell,
                                                           proto.rho);
        const std::string key = "lyapunov.agent_" + std::to_string(i + 1);
        put(os, key + ".pass", lc.pass ? "true" : "false");
        put(os, key + ".slack", format_double(lc.slack));
      }
      syn.certificates = static_certificates(net.tree, a, proto);
      syn.static_protocol = proto;
      break;
    }
    case ScenarioMode::DynamicPartialState: {
      const AgentModel& a = sc.agents.front();
      a.validate();
      if (!net.tree.alpha()) {
        throw Error(ErrorKind::InvalidArgument, "dynamic-partial-state needs an upper bound alpha");
      }
      DynamicDesignOptions opt;
      opt.delta_init = sc.delta_init;
      const DynamicProtocol proto =
          design_dynamic_partial_state(a.A, a.B, a.C, net.tree.beta(), *net.tree.alpha(), opt);
      put(os, "delta", format_double(proto.delta));
      put(os, "delta_halvings", std::to_string(proto.halvings));
      put(os, "grid_abscissa", format_double(proto.grid_abscissa));
      put(os, "K", format_matrix(proto.K));
      put(os, "P_delta", format_matrix(proto.P_delta));
      put(os, "Ac", format_matrix(proto.Ac));
      put(os, "Bc", format_matrix(proto.Bc));
      put(os, "Cc", format_matrix(proto.Cc));
      put(os, "Dc", format_matrix(proto.Dc));
      syn.certificates = dynamic_certificates(net.tree, a, proto);
      syn.dynamic_protocol = proto;
      break;
    }
    case ScenarioMode::Heterogeneous: {
      HeteroDesignOptions opt;
      opt.nbar = sc.nbar;
      opt.K = sc.K;
      opt.epsilon_init = sc.epsilon_init;
      HeteroDesign design = design_heterogeneous(sc.agents, net.tree, opt);
      put(os, "nbar", std::to_string(design.nbar));
      put(os, "p", std::to_string(design.p));
      put(os, "epsilon", format_double(design.observer.epsilon));
      put(os, "epsilon_halvings", std::to_string(design.observer.halvings));
      put(os, "Q_eps", format_matrix(design.observer.Q_eps));
      put(os, "K_eps", format_matrix(design.observer.K_eps));
      for (std::size_t c = 0; c < design.controllers.size(); ++c) {
        const HeteroAgentController& ctrl = design.controllers[c];
        const std::string key = "agent_" + std::to_string(ctrl.agent + 1);
        put(os, key + ".q", std::to_string(ctrl.transform.q));
        put(os, key + ".k", std::to_string(ctrl.transform.k));
        put(os, key + ".Abar", format_matrix(ctrl.transform.Abar));
        put(os, key + ".Cbar", format_matrix(ctrl.transform.Cbar));
        put(os, key + ".conjugation_residual", format_double(ctrl.transform.conjugation_residual));
        put(os, key + ".G", format_matrix(ctrl.chain.G));
        put(os, key + ".intertwining_residual", format_double(ctrl.chain.intertwining_residual));
        put(os, key + ".Pi", format_matrix(ctrl.feedback.Pi));
        put(os, key + ".Gamma", format_matrix(ctrl.feedback.Gamma));
        put(os, key + ".K", format_matrix(ctrl.feedback.K));
        put(os, key + ".F", format_matrix(ctrl.feedback.F));
        put(os, key + ".regulator_residual", format_double(ctrl.feedback.regulator_residual));
        put(os, key + ".mismatch_norm", format_double(design.observer.mismatch_norm[c]));
        put(os, key + ".observer_abscissa", format_double(design.observer.abscissa[c]));
      }
      syn.certificates = hetero_certificates(net.tree, sc.agents, design);
      syn.hetero = std::move(design);
      break;
    }
  }
  put(os, "certificates", std::to_string(syn.certificates.size()));
  for (std::size_t k = 0; k < syn.certificates.size(); ++k) {
    const auto& c = syn.certificates[k];
    const std::string key = "certificate." + std::to_string(k + 1);
    put(os, key + ".description", c.description);
    put(os, key + ".agent", std::to_string(c.agent + 1));
    put(os, key + ".l_ii", format_double(c.ell));
    put(os, key + ".abscissa", format_double(c.abscissa));
  }
  syn.dump = os.str();
  return syn;
}

SimConfig sim_config(const Scenario& sc, const std::vector<int>& dims,
                     const std::vector<int>& plant_dims, const std::vector<Vector>& z0) {
  SimConfig cfg;
  cfg.step = sc.step;
  cfg.horizon = sc.horizon;
  cfg.stride = sc.stride;
  if (sc.history == HistoryPolicy::Ramp) {
    for (std::size_t i = 0; i < z0.size(); ++i) {
      if (sc.history_slopes[i].size() != plant_dims[i]) {
        throw Error(ErrorKind::DimensionMismatch,
                    "history slope of agent " + std::to_string(i + 1) + " has wrong size");
      }
      Vector slope = Vector::Zero(dims[i]);
      slope.head(plant_dims[i]) = sc.history_slopes[i];
      cfg.history.push_back(ramp_history(z0[i], slope));
    }
  }
  return cfg;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << text;
}

struct FrameResult {
  std::string name;
  Trajectory traj;
  SyncReport report;
};

void write_frame(const std::filesystem::path& dir, const FrameResult& fr) {
  std::filesystem::create_directories(dir);
  write_trajectory_csv(fr.traj, dir / "state.csv", "state");
  bool has_controller = false;
  for (int a = 0; a < fr.traj.agents(); ++a) has_controller |= fr.traj.controller_dim(a) > 0;
  if (has_controller) write_trajectory_csv(fr.traj, dir / "controller.csv", "controller");
  write_trajectory_csv(fr.traj, dir / "input.csv", "input");
  write_trajectory_csv(fr.traj, dir / "output.csv", "output");
  write_error_curve_csv(fr.report.delayed_error, dir / "delayed_error.csv");
  if (fr.report.trajectory) {
    write_error_curve_csv(fr.report.trajectory->deviation, dir / "deviation.csv");
  }
  write_text(dir / "report.txt", serialize_report(fr.report));
}

std::vector<FrameResult> simulate(const Scenario& sc, const Network& net, const Synthesis& syn) {
  const int N = net.tree.size();
  if (static_cast<int>(sc.initial_states.size()) != N) {
    throw Error(ErrorKind::DimensionMismatch, "one initial state per agent required");
  }
  std::vector<FrameResult> results;
  if (sc.mode != ScenarioMode::Heterogeneous) {
    const AgentModel& a = sc.agents.front();
    AgentDynamics loop = syn.static_protocol ? static_closed_loop(a, *syn.static_protocol)
                                             : dynamic_closed_loop(a, *syn.dynamic_protocol);
    std::vector<Vector> z0;
    for (int i = 0; i < N; ++i) {
      if (sc.initial_states[i].size() != a.n()) {
        throw Error(ErrorKind::DimensionMismatch,
                    "initial state of agent " + std::to_string(i + 1) + " has wrong size");
      }
      Vector z = Vector::Zero(loop.dim());
      z.head(a.n()) = sc.initial_states[i];
      if (!sc.controller_states.empty()) {
        if (sc.controller_states[i].size() != loop.dim() - a.n()) {
          throw Error(ErrorKind::DimensionMismatch, "controller state of agent " +
                                                        std::to_string(i + 1) + " has wrong size");
        }
        z.tail(loop.dim() - a.n()) = sc.controller_states[i];
      }
      z0.push_back(z);
    }
    const SimConfig cfg = sim_config(sc, std::vector<int>(N, loop.dim()),
                                     std::vector<int>(N, a.n()), z0);
    FrameResult fr;
    fr.name = "delayed";
    if (syn.static_protocol) {
      fr.traj = simulate_homogeneous_static(net.tree, net.delays, a, *syn.static_protocol,
                                            sc.initial_states, cfg);
    } else {
      fr.traj = simulate_homogeneous_dynamic(net.tree, net.delays, a, *syn.dynamic_protocol,
                                             sc.initial_states, sc.controller_states, cfg);
    }
    fr.report.mode = std::string(to_string(sc.mode));
    fr.report.tolerances = sc.tolerances;
    fr.report.delayed_error = delayed_state_sync_error(fr.traj, net.tree, net.delays, sc.pairs);
    fr.report.trajectory = synchronized_trajectory_check(fr.traj, loop.M, net.delays);
    fr.report.reference_peak = fr.report.trajectory->reference_peak;
    fr.report.certificates = syn.certificates;
    finalize_report(fr.report);
    results.push_back(std::move(fr));
    return results;
  }

  const HeteroDesign& design = *syn.hetero;
  std::vector<int> dims, plant_dims;
  std::vector<Vector> z0;
  for (int i = 0; i < N; ++i) {
    const int n = sc.agents[i].n();
    if (sc.initial_states[i].size() != n) {
      throw Error(ErrorKind::DimensionMismatch,
                  "initial state of agent " + std::to_string(i + 1) + " has wrong size");
    }
    const int d = i == 0 ? n : n + design.p * design.nbar;
    Vector z = Vector::Zero(d);
    z.head(n) = sc.initial_states[i];
    dims.push_back(d);
    plant_dims.push_back(n);
    z0.push_back(z);
  }
  std::vector<HeteroFrame> frames;
  if (sc.frames != FrameSelection::Transformed) frames.push_back(HeteroFrame::Delayed);
  if (sc.frames != FrameSelection::Delayed) frames.push_back(HeteroFrame::Transformed);
  for (HeteroFrame frame : frames) {
    FrameResult fr;
    fr.name = frame == HeteroFrame::Delayed ? "delayed" : "transformed";
    DelayAssignment delays = net.delays;
    if (frame == HeteroFrame::Transformed) {
      for (auto& [edge, tau] : delays.edge_delays) tau = 0.0;
      delays.root_delays.setZero();
    }
    const SimConfig cfg = sim_config(sc, dims, plant_dims, z0);
    fr.traj = simulate_heterogeneous(net.tree, net.delays, sc.agents, design, sc.initial_states,
                                     cfg, frame);
    fr.report.mode = std::string(to_string(sc.mode)) + " (" + fr.name + ")";
    fr.report.tolerances = sc.tolerances;
    fr.report.delayed_error = delayed_output_sync_error(fr.traj, net.tree, delays, sc.pairs);
    for (int k = fr.traj.zero_index(); k < fr.traj.samples(); ++k) {
      fr.report.reference_peak = std::max(fr.report.reference_peak, fr.traj.output(0, k).norm());
    }
    fr.report.certificates = syn.certificates;
    finalize_report(fr.report);
    results.push_back(std::move(fr));
  }
  return results;
}

int exit_code_for(const Error& e) {
  return is_input_error(e.kind()) ? kExitInputError : kExitDesignError;
}

}  // namespace

std::filesystem::path resolve_output_dir(const std::filesystem::path& scenario_path,
                                         const RunOptions& options) {
  if (!options.out_dir.empty()) return options.out_dir;
  const char* env = std::getenv("DELAYSYNC_OUT");
  const std::filesystem::path root = env && *env ? env : "delaysync_out";
  return root / scenario_path.stem();
}

std::string design_report(const Scenario& scenario) {
  return synthesize(scenario, build_network(scenario)).dump;
}

int run_scenario(const std::filesystem::path& scenario_path, const RunOptions& options,
                 std::ostream& out, std::ostream& err) {
  try {
    const Scenario sc = load_scenario(scenario_path);
    const Network net = build_network(sc);
    const Synthesis syn = synthesize(sc, net);
    const std::vector<FrameResult> frames = simulate(sc, net, syn);

    const std::filesystem::path dir = resolve_output_dir(scenario_path, options);
    std::filesystem::create_directories(dir);
    write_text(dir / "scenario.txt", serialize_scenario(sc));
    write_text(dir / "protocol.txt", syn.dump);
    bool pass = true;
    std::ostringstream summary;
    for (std::size_t f = 0; f < frames.size(); ++f) {
      write_frame(f == 0 ? dir : dir / frames[f].name, frames[f]);
      pass = pass && frames[f].report.verdict;
      put(summary, frames[f].name + ".verdict", frames[f].report.verdict ? "pass" : "fail");
      put(summary, frames[f].name + ".terminal_delayed_error",
          format_double(frames[f].report.terminal_error));
      if (!options.quiet) {
        out << frames[f].name << ": terminal delayed error "
            << format_double(frames[f].report.terminal_error) << ", verdict "
            << (frames[f].report.verdict ? "pass" : "fail") << '\n';
        for (const auto& why : frames[f].report.failures) out << "  " << why << '\n';
      }
    }
    put(summary, "verdict", pass ? "pass" : "fail");
    write_text(dir / "summary.txt", summary.str());
    if (!options.quiet) out << "artifacts written to " << dir.string() << '\n';
    return pass ? kExitPass : kExitVerdictFail;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDesignError;
  }
}

int verify_design(const std::filesystem::path& scenario_path, const RunOptions& options,
                  std::ostream& out, std::ostream& err) {
  try {
    const Scenario sc = load_scenario(scenario_path);
    const Network net = build_network(sc);
    const Synthesis syn = synthesize(sc, net);
    bool pass = true;
    for (const auto& c : syn.certificates) {
      pass = pass && c.abscissa < -sc.tolerances.certificate_margin;
    }
    if (!options.quiet) out << syn.dump;
    out << "verdict = " << (pass ? "pass" : "fail") << '\n';
    return pass ? kExitPass : kExitVerdictFail;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitDesignError;
  }
}

}  // namespace delaysync
