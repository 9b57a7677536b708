#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <vector>

#include "delaysync/matops.hpp"
#include "delaysync/netgraph.hpp"
#include "delaysync/protocols.hpp"

namespace delaysync {

/// Closed-loop description of one agent inside the network.
///
/// The agent carries an internal state z (plant first, then controller) and
/// transmits s = E z to its children. With the delayed diffusive signal
/// d = a_{i,parent} (E_i z_i(t) - E_parent z_parent(t - tau)), it evolves as
/// z' = M z + W d. The root receives nothing (d = 0).
struct AgentDynamics {
  Matrix M, W, E;
  Matrix Y;       // output y = Y z
  Matrix Uz, Ud;  // input u = Uz z + Ud d
  int plant_dim = 0;

  int dim() const { return static_cast<int>(M.rows()); }
  int signal_dim() const { return static_cast<int>(E.rows()); }
};

AgentDynamics static_closed_loop(const AgentModel& agent, const StaticProtocol& protocol);
AgentDynamics dynamic_closed_loop(const AgentModel& agent, const DynamicProtocol& protocol);
/// Follower running the observer-based regulator; transmits (y_i, Co phihat_i).
AgentDynamics hetero_follower_loop(const AgentModel& agent, const HeteroAgentController& ctrl,
                                   const HeteroObserver& observer);
/// Root of a heterogeneous network: u = 0, transmits (y_1, 0).
AgentDynamics hetero_root_loop(const AgentModel& root, int observer_outputs);

/// Initial history z(t) for t <= 0.
using HistoryFunction = std::function<Vector(double)>;

HistoryFunction constant_history(Vector z0);
HistoryFunction ramp_history(Vector z0, Vector slope);

struct SimConfig {
  double step = 0.01;
  double horizon = 10.0;
  int stride = 1;
  /// Per-agent history on [-max root delay, 0]; empty means constant at the
  /// initial state.
  std::vector<HistoryFunction> history;
};

/// Uniformly sampled closed-loop trajectory, including the prepended history.
class Trajectory {
 public:
  Trajectory() = default;
  Trajectory(double dt, int history_samples, int samples, const std::vector<AgentDynamics>& dyn);
  /// Empty trajectory with the same per-agent layout as `like`.
  static Trajectory with_layout_of(const Trajectory& like, double dt, int history_samples,
                                   int samples);

  int agents() const { return static_cast<int>(z_.size()); }
  int samples() const { return static_cast<int>(times_.size()); }
  int history_samples() const { return history_samples_; }
  double dt() const { return dt_; }
  const std::vector<double>& times() const { return times_; }
  double start_time() const { return times_.front(); }
  double end_time() const { return times_.back(); }
  /// Index of the sample at t = 0.
  int zero_index() const { return history_samples_; }

  int dim(int agent) const { return static_cast<int>(z_[agent].rows()); }
  int plant_dim(int agent) const { return plant_dims_[agent]; }
  int controller_dim(int agent) const { return dim(agent) - plant_dims_[agent]; }

  Eigen::Ref<const Vector> state(int agent, int k) const { return z_[agent].col(k); }
  Eigen::Ref<const Vector> rate(int agent, int k) const { return dz_[agent].col(k); }
  Vector plant_state(int agent, int k) const { return z_[agent].col(k).head(plant_dims_[agent]); }
  Vector controller_state(int agent, int k) const {
    return z_[agent].col(k).tail(controller_dim(agent));
  }
  Eigen::Ref<const Vector> input(int agent, int k) const { return u_[agent].col(k); }
  Vector output(int agent, int k) const { return output_maps_[agent] * z_[agent].col(k); }
  const Matrix& output_map(int agent) const { return output_maps_[agent]; }
  int input_dim(int agent) const { return static_cast<int>(u_[agent].rows()); }
  int output_dim(int agent) const { return static_cast<int>(output_maps_[agent].rows()); }

  /// Cubic Hermite interpolation of z_agent(t) from stored values and rates.
  /// Throws HistoryUnderrun before the first sample and HorizonTooShort past
  /// the last available one.
  Vector state_at(int agent, double t) const;
  Vector rate_at(int agent, double t) const;
  Vector plant_state_at(int agent, double t) const {
    return state_at(agent, t).head(plant_dims_[agent]);
  }
  Vector output_at(int agent, double t) const { return output_maps_[agent] * state_at(agent, t); }
  Vector input_at(int agent, double t) const;

  /// Keeps every stride-th sample (history length must be a multiple of stride).
  Trajectory subsample(int stride) const;

  // Writers used by the integrator.
  void set_sample(int agent, int k, const Vector& z) { z_[agent].col(k) = z; }
  void set_rate(int agent, int k, const Vector& dz) { dz_[agent].col(k) = dz; }
  void set_left_rate_at_zero(int agent, const Vector& dz) { dz_left0_[agent] = dz; }
  void set_input(int agent, int k, const Vector& u) { u_[agent].col(k) = u; }
  /// Samples [0, filled) are valid; lookups beyond are rejected.
  void set_filled(int filled) { filled_ = filled; }

 private:
  struct Bracket {
    int k;
    double theta;
    bool exact;
  };
  Bracket locate(double t) const;

  double dt_ = 0.0;
  int history_samples_ = 0;
  int filled_ = 0;
  std::vector<double> times_;
  std::vector<Matrix> z_, dz_, u_;
  std::vector<Vector> dz_left0_;
  std::vector<int> plant_dims_;
  std::vector<Matrix> output_maps_;
};

/// zeta_i(t) = sum_j a_ij (y_i(t) - y_j(t - tau_ij)); zero for the root.
Vector coupling_signal(const Trajectory& traj, const SpanningTreeNetwork& tree,
                       const DelayAssignment& delays, double t, int agent);

/// Fixed-step classical RK4 on the networked delay system. Delayed parent
/// signals come from Hermite interpolation of the stored grid; zero-delay
/// edges use the parent's current stage value.
///
/// Throws StepTooLarge when step > (smallest positive delay) / 4 or when the
/// step is outside the RK4 stability region of an agent's local loop, and
/// NonFinite when any state norm exceeds 1e12.
Trajectory simulate_network(const SpanningTreeNetwork& tree, const DelayAssignment& delays,
                            const std::vector<AgentDynamics>& dynamics,
                            const std::vector<Vector>& initial_states, const SimConfig& config);

Trajectory simulate_homogeneous_static(const SpanningTreeNetwork& tree,
                                       const DelayAssignment& delays, const AgentModel& agent,
                                       const StaticProtocol& protocol,
                                       const std::vector<Vector>& initial_states,
                                       const SimConfig& config);

/// Empty `initial_controller_states` means all controllers start at zero.
Trajectory simulate_homogeneous_dynamic(const SpanningTreeNetwork& tree,
                                        const DelayAssignment& delays, const AgentModel& agent,
                                        const DynamicProtocol& protocol,
                                        const std::vector<Vector>& initial_states,
                                        const std::vector<Vector>& initial_controller_states,
                                        const SimConfig& config);

enum class HeteroFrame {
  /// Original time; outputs and observer estimates travel over delayed links.
  Delayed,
  /// Time-shifted coordinates: the delay-free network integrated directly.
  Transformed,
};

/// Observer states start at zero.
Trajectory simulate_heterogeneous(const SpanningTreeNetwork& tree, const DelayAssignment& delays,
                                  const std::vector<AgentModel>& agents, const HeteroDesign& design,
                                  const std::vector<Vector>& initial_states, const SimConfig& config,
                                  HeteroFrame frame = HeteroFrame::Delayed);

/// Advances agent i by its cumulative root delay: z~_i(t) = z_i(t + tau_bar_i),
/// on the common window [0, T - max tau_bar]. Throws HorizonTooShort.
Trajectory shift_by_root_delays(const Trajectory& traj, const DelayAssignment& delays);

/// CSV with header `t,agent,<kind>_index,value` (one-based agent/index,
/// 17 significant digits). kind is one of "state", "controller", "input",
/// "output".
void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path,
                          const std::string& kind);

}  // namespace delaysync
