#include "delaysync/ddesim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "delaysync/error.hpp"
#include "delaysync/textio.hpp"

namespace delaysync {
namespace {

constexpr double kSnap = 1e-7;            // grid snapping, in units of the step
constexpr double kDivergence = 1e12;
constexpr double kHistoryDiff = 1e-5;     // finite-difference offset for history rates
constexpr double kStabilityRadius = 2.5;  // |lambda| h bound inside the RK4 region

int steps_for(double span, double h) {
  return static_cast<int>(std::ceil(span / h - 1e-9));
}

int round_up(int value, int multiple) { return (value + multiple - 1) / multiple * multiple; }

void check_dynamics(const AgentDynamics& d, int index) {
  const int n = d.dim();
  const bool ok = d.M.rows() == d.M.cols() && d.W.rows() == n && d.E.cols() == n &&
                  d.W.cols() == d.E.rows() && d.Y.cols() == n && d.Uz.cols() == n &&
                  d.Ud.rows() == d.Uz.rows() && d.Ud.cols() == d.E.rows() && d.plant_dim >= 0 &&
                  d.plant_dim <= n;
  if (!ok) {
    throw Error(ErrorKind::DimensionMismatch,
                "closed-loop blocks of agent " + std::to_string(index + 1) + " are inconsistent");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Closed-loop builders

AgentDynamics static_closed_loop(const AgentModel& agent, const StaticProtocol& protocol) {
  agent.validate();
  const int n = agent.n(), m = agent.m();
  if (protocol.F.rows() != m || protocol.F.cols() != agent.p()) {
    throw Error(ErrorKind::DimensionMismatch, "static gain must be m x p");
  }
  AgentDynamics d;
  d.M = agent.A;
  d.W = agent.B * protocol.F;
  d.E = agent.C;
  d.Y = agent.C;
  d.Uz = Matrix::Zero(m, n);
  d.Ud = protocol.F;
  d.plant_dim = n;
  return d;
}

AgentDynamics dynamic_closed_loop(const AgentModel& agent, const DynamicProtocol& protocol) {
  agent.validate();
  const int n = agent.n(), m = agent.m(), p = agent.p();
  const int nc = static_cast<int>(protocol.Ac.rows());
  if (protocol.Ac.cols() != nc || protocol.Bc.rows() != nc || protocol.Bc.cols() != p ||
      protocol.Cc.rows() != m || protocol.Cc.cols() != nc || protocol.Dc.rows() != m ||
      protocol.Dc.cols() != p) {
    throw Error(ErrorKind::DimensionMismatch, "dynamic protocol blocks inconsistent with agent");
  }
  AgentDynamics d;
  d.M = Matrix::Zero(n + nc, n + nc);
  d.M.topLeftCorner(n, n) = agent.A;
  d.M.topRightCorner(n, nc) = agent.B * protocol.Cc;
  d.M.bottomRightCorner(nc, nc) = protocol.Ac;
  d.W.resize(n + nc, p);
  d.W << agent.B * protocol.Dc, protocol.Bc;
  d.E = Matrix::Zero(p, n + nc);
  d.E.leftCols(n) = agent.C;
  d.Y = d.E;
  d.Uz = Matrix::Zero(m, n + nc);
  d.Uz.rightCols(nc) = protocol.Cc;
  d.Ud = protocol.Dc;
  d.plant_dim = n;
  return d;
}

AgentDynamics hetero_follower_loop(const AgentModel& agent, const HeteroAgentController& ctrl,
                                   const HeteroObserver& observer) {
  agent.validate();
  const ChainForm& chain = ctrl.chain;
  const int n = agent.n(), m = agent.m(), p = chain.p;
  const int no = p * chain.nbar;
  const Matrix gain = ctrl.feedback.F * chain.Xi_left_inverse;  // m x no
  const Matrix injection = observer.H_eps * observer.Q_eps * chain.Co.transpose();

  AgentDynamics d;
  d.M = Matrix::Zero(n + no, n + no);
  d.M.topLeftCorner(n, n) = agent.A;
  d.M.topRightCorner(n, no) = agent.B * gain;
  d.M.bottomRightCorner(no, no) = chain.Ao + chain.Ko + chain.Bo * gain;
  // d = a (y_i - y_j, Co phihat_i - Co phihat_j): the observer sees the difference.
  d.W = Matrix::Zero(n + no, 2 * p);
  d.W.bottomLeftCorner(no, p) = injection;
  d.W.bottomRightCorner(no, p) = -injection;
  d.E = Matrix::Zero(2 * p, n + no);
  d.E.topLeftCorner(p, n) = agent.C;
  d.E.bottomRightCorner(p, no) = chain.Co;
  d.Y = Matrix::Zero(p, n + no);
  d.Y.leftCols(n) = agent.C;
  d.Uz = Matrix::Zero(m, n + no);
  d.Uz.rightCols(no) = gain;
  d.Ud = Matrix::Zero(m, 2 * p);
  d.plant_dim = n;
  return d;
}

AgentDynamics hetero_root_loop(const AgentModel& root, int observer_outputs) {
  root.validate();
  const int n = root.n(), m = root.m(), p = root.p();
  if (observer_outputs != p) {
    throw Error(ErrorKind::DimensionMismatch, "observer output dimension must equal p");
  }
  AgentDynamics d;
  d.M = root.A;
  d.W = Matrix::Zero(n, 2 * p);
  d.E = Matrix::Zero(2 * p, n);
  d.E.topRows(p) = root.C;
  d.Y = root.C;
  d.Uz = Matrix::Zero(m, n);
  d.Ud = Matrix::Zero(m, 2 * p);
  d.plant_dim = n;
  return d;
}

HistoryFunction constant_history(Vector z0) {
  return [z0 = std::move(z0)](double) { return z0; };
}

HistoryFunction ramp_history(Vector z0, Vector slope) {
  if (z0.size() != slope.size()) {
    throw Error(ErrorKind::DimensionMismatch, "ramp history offset and slope differ in size");
  }
  return [z0 = std::move(z0), slope = std::move(slope)](double t) -> Vector {
    return z0 + t * slope;
  };
}

// ---------------------------------------------------------------------------
// Trajectory

Trajectory::Trajectory(double dt, int history_samples, int samples,
                       const std::vector<AgentDynamics>& dyn)
    : dt_(dt), history_samples_(history_samples), filled_(0) {
  times_.resize(samples);
  for (int k = 0; k < samples; ++k) times_[k] = (k - history_samples) * dt;
  for (const auto& d : dyn) {
    z_.push_back(Matrix::Zero(d.dim(), samples));
    dz_.push_back(Matrix::Zero(d.dim(), samples));
    u_.push_back(Matrix::Zero(d.Uz.rows(), samples));
    dz_left0_.push_back(Vector::Zero(d.dim()));
    plant_dims_.push_back(d.plant_dim);
    output_maps_.push_back(d.Y);
  }
}

Trajectory Trajectory::with_layout_of(const Trajectory& like, double dt, int history_samples,
                                      int samples) {
  Trajectory t;
  t.dt_ = dt;
  t.history_samples_ = history_samples;
  t.times_.resize(samples);
  for (int k = 0; k < samples; ++k) t.times_[k] = (k - history_samples) * dt;
  for (int a = 0; a < like.agents(); ++a) {
    t.z_.push_back(Matrix::Zero(like.dim(a), samples));
    t.dz_.push_back(Matrix::Zero(like.dim(a), samples));
    t.u_.push_back(Matrix::Zero(like.input_dim(a), samples));
    t.dz_left0_.push_back(Vector::Zero(like.dim(a)));
  }
  t.plant_dims_ = like.plant_dims_;
  t.output_maps_ = like.output_maps_;
  return t;
}

Trajectory::Bracket Trajectory::locate(double t) const {
  const double x = t / dt_ + history_samples_;
  if (x < -kSnap) {
    throw Error(ErrorKind::HistoryUnderrun,
                "t = " + format_double(t) + " precedes the stored history");
  }
  if (x > (filled_ - 1) + kSnap) {
    throw Error(ErrorKind::HorizonTooShort,
                "t = " + format_double(t) + " lies beyond the simulated horizon");
  }
  const double r = std::round(x);
  if (std::abs(x - r) <= kSnap) {
    return {static_cast<int>(r), 0.0, true};
  }
  const int k = static_cast<int>(std::floor(x));
  return {k, x - k, false};
}

Vector Trajectory::state_at(int agent, double t) const {
  const Bracket b = locate(t);
  if (b.exact) return z_[agent].col(b.k);
  const double th = b.theta, th2 = th * th, th3 = th2 * th;
  const double h00 = 2 * th3 - 3 * th2 + 1, h10 = th3 - 2 * th2 + th;
  const double h01 = -2 * th3 + 3 * th2, h11 = th3 - th2;
  const Vector& right_rate =
      b.k + 1 == history_samples_ ? dz_left0_[agent] : Vector(dz_[agent].col(b.k + 1));
  return h00 * z_[agent].col(b.k) + h10 * dt_ * dz_[agent].col(b.k) +
         h01 * z_[agent].col(b.k + 1) + h11 * dt_ * right_rate;
}

Vector Trajectory::rate_at(int agent, double t) const {
  const Bracket b = locate(t);
  if (b.exact) return dz_[agent].col(b.k);
  const double th = b.theta, th2 = th * th;
  const double d00 = 6 * th2 - 6 * th, d10 = 3 * th2 - 4 * th + 1;
  const double d01 = -6 * th2 + 6 * th, d11 = 3 * th2 - 2 * th;
  const Vector& right_rate =
      b.k + 1 == history_samples_ ? dz_left0_[agent] : Vector(dz_[agent].col(b.k + 1));
  return (d00 * z_[agent].col(b.k) + d01 * z_[agent].col(b.k + 1)) / dt_ +
         d10 * dz_[agent].col(b.k) + d11 * right_rate;
}

Vector Trajectory::input_at(int agent, double t) const {
  const Bracket b = locate(t);
  if (b.exact) return u_[agent].col(b.k);
  return (1.0 - b.theta) * u_[agent].col(b.k) + b.theta * u_[agent].col(b.k + 1);
}

Trajectory Trajectory::subsample(int stride) const {
  if (stride < 1) throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
  if (stride == 1) return *this;
  if (history_samples_ % stride != 0) {
    throw Error(ErrorKind::InvalidArgument, "history length is not a multiple of the stride");
  }
  const int kept = (filled_ - 1) / stride + 1;
  Trajectory out = with_layout_of(*this, dt_ * stride, history_samples_ / stride, kept);
  for (int a = 0; a < agents(); ++a) {
    for (int k = 0; k < kept; ++k) {
      out.z_[a].col(k) = z_[a].col(k * stride);
      out.dz_[a].col(k) = dz_[a].col(k * stride);
      out.u_[a].col(k) = u_[a].col(k * stride);
    }
    out.dz_left0_[a] = dz_left0_[a];
  }
  out.filled_ = kept;
  return out;
}

// ---------------------------------------------------------------------------
// Integration

Vector coupling_signal(const Trajectory& traj, const SpanningTreeNetwork& tree,
                       const DelayAssignment& delays, double t, int agent) {
  const int parent = tree.parent(agent);
  if (parent < 0) return Vector::Zero(traj.output_dim(agent));
  const double tau = delays.edge_delay(agent, parent);
  return tree.parent_weight(agent) * (traj.output_at(agent, t) - traj.output_at(parent, t - tau));
}

namespace {

void check_step_stability(const std::vector<AgentDynamics>& dynamics,
                          const SpanningTreeNetwork& tree, double h) {
  for (int i = 0; i < tree.size(); ++i) {
    const AgentDynamics& d = dynamics[i];
    Matrix local = d.M;
    if (tree.parent(i) >= 0) local += tree.parent_weight(i) * d.W * d.E;
    const ComplexVector ev = eigenvalues(local);
    const double radius = ev.size() == 0 ? 0.0 : ev.cwiseAbs().maxCoeff();
    if (radius * h > kStabilityRadius) {
      throw Error(ErrorKind::StepTooLarge,
                  "step " + format_double(h) + " is outside the RK4 stability region of agent " +
                      std::to_string(i + 1) + " (local spectral radius " +
                      format_double(radius) + "); use step <= " +
                      format_double(kStabilityRadius / radius));
    }
  }
}

void check_finite(const Vector& z, int agent, double t) {
  if (!z.allFinite() || z.norm() > kDivergence) {
    throw Error(ErrorKind::NonFinite, "state of agent " + std::to_string(agent + 1) +
                                          " diverged at t = " + format_double(t));
  }
}

}  // namespace

Trajectory simulate_network(const SpanningTreeNetwork& tree, const DelayAssignment& delays,
                            const std::vector<AgentDynamics>& dynamics,
                            const std::vector<Vector>& initial_states, const SimConfig& config) {
  const int N = tree.size();
  if (static_cast<int>(dynamics.size()) != N || static_cast<int>(initial_states.size()) != N) {
    throw Error(ErrorKind::DimensionMismatch, "one closed loop and initial state per agent");
  }
  if (!config.history.empty() && static_cast<int>(config.history.size()) != N) {
    throw Error(ErrorKind::DimensionMismatch, "history must be empty or given for every agent");
  }
  for (int i = 0; i < N; ++i) {
    check_dynamics(dynamics[i], i);
    if (initial_states[i].size() != dynamics[i].dim()) {
      throw Error(ErrorKind::DimensionMismatch,
                  "initial state of agent " + std::to_string(i + 1) + " has wrong size");
    }
    const int parent = tree.parent(i);
    if (parent >= 0 && dynamics[i].E.rows() != dynamics[parent].E.rows()) {
      throw Error(ErrorKind::DimensionMismatch, "transmitted signal sizes differ on an edge");
    }
  }
  const double h = config.step;
  if (!(h > 0.0) || !std::isfinite(h)) throw Error(ErrorKind::InvalidArgument, "step must be > 0");
  if (!(config.horizon > 0.0)) throw Error(ErrorKind::InvalidArgument, "horizon must be > 0");
  if (config.stride < 1) throw Error(ErrorKind::InvalidArgument, "stride must be >= 1");
  const double tau_min = delays.min_positive_delay();
  if (tau_min > 0.0 && h > tau_min / 4.0 * (1.0 + 1e-12)) {
    throw Error(ErrorKind::StepTooLarge, "step " + format_double(h) +
                                             " exceeds a quarter of the smallest delay " +
                                             format_double(tau_min));
  }
  check_step_stability(dynamics, tree, h);

  std::vector<double> edge_tau(N, 0.0);
  for (int i = 0; i < N; ++i) edge_tau[i] = delays.edge_delay(i, tree.parent(i));

  const int stride = config.stride;
  const int hist = round_up(steps_for(delays.max_root_delay(), h), stride);
  const int steps = round_up(steps_for(config.horizon, h), stride);
  Trajectory traj(h, hist, hist + steps + 1, dynamics);

  // Initial history.
  for (int i = 0; i < N; ++i) {
    const HistoryFunction f =
        config.history.empty() ? constant_history(initial_states[i]) : config.history[i];
    for (int k = 0; k < hist; ++k) {
      const double t = traj.times()[k];
      const Vector z = f(t);
      if (z.size() != dynamics[i].dim()) {
        throw Error(ErrorKind::DimensionMismatch, "history of agent " + std::to_string(i + 1) +
                                                      " returns a vector of the wrong size");
      }
      traj.set_sample(i, k, z);
      traj.set_rate(i, k, (f(t + kHistoryDiff) - f(t - kHistoryDiff)) / (2 * kHistoryDiff));
    }
    traj.set_left_rate_at_zero(
        i, (3.0 * f(0.0) - 4.0 * f(-kHistoryDiff) + f(-2.0 * kHistoryDiff)) / (2 * kHistoryDiff));
    traj.set_sample(i, hist, initial_states[i]);
    check_finite(initial_states[i], i, 0.0);
  }
  traj.set_filled(hist + 1);

  // Agents in topological order so zero-delay edges can read the parent's stage value.
  std::vector<int> order{0};
  for (int c : tree.children_in_order()) order.push_back(c);

  std::vector<Vector> stage(N), k1(N), k2(N), k3(N), k4(N);

  // Evaluates every agent's derivative at time ts for stage states `z`; also
  // returns the coupling d when `couplings` is given.
  auto evaluate = [&](double ts, const std::vector<Vector>& z, std::vector<Vector>& out,
                      std::vector<Vector>* couplings) {
    for (int i : order) {
      const AgentDynamics& d = dynamics[i];
      const int parent = tree.parent(i);
      if (parent < 0) {
        out[i] = d.M * z[i];
        if (couplings) (*couplings)[i] = Vector::Zero(d.signal_dim());
        continue;
      }
      const Vector parent_state =
          edge_tau[i] == 0.0 ? z[parent] : traj.state_at(parent, ts - edge_tau[i]);
      const Vector coupling =
          tree.parent_weight(i) * (d.E * z[i] - dynamics[parent].E * parent_state);
      out[i] = d.M * z[i] + d.W * coupling;
      if (couplings) (*couplings)[i] = coupling;
    }
  };

  std::vector<Vector> current(N), couplings(N), carry(N);
  for (int i = 0; i < N; ++i) {
    current[i] = initial_states[i];
    carry[i] = Vector::Zero(current[i].size());
  }

  auto record_rate_and_input = [&](int n) {
    const double t = traj.times()[n];
    evaluate(t, current, k1, &couplings);
    for (int i = 0; i < N; ++i) {
      traj.set_rate(i, n, k1[i]);
      traj.set_input(i, n, dynamics[i].Uz * current[i] + dynamics[i].Ud * couplings[i]);
    }
  };

  for (int n = hist; n < hist + steps; ++n) {
    const double t = traj.times()[n];
    record_rate_and_input(n);
    for (int i = 0; i < N; ++i) stage[i] = current[i] + 0.5 * h * k1[i];
    evaluate(t + 0.5 * h, stage, k2, nullptr);
    for (int i = 0; i < N; ++i) stage[i] = current[i] + 0.5 * h * k2[i];
    evaluate(t + 0.5 * h, stage, k3, nullptr);
    for (int i = 0; i < N; ++i) stage[i] = current[i] + h * k3[i];
    evaluate(t + h, stage, k4, nullptr);
    for (int i = 0; i < N; ++i) {
      // Compensated update; long horizons otherwise drift by a few ulps per step.
      const Vector increment =
          (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) - carry[i];
      const Vector next = current[i] + increment;
      carry[i] = (next - current[i]) - increment;
      current[i] = next;
      check_finite(current[i], i, t + h);
      traj.set_sample(i, n + 1, current[i]);
    }
    traj.set_filled(n + 2);
  }
  record_rate_and_input(hist + steps);

  return traj.subsample(stride);
}

Trajectory simulate_homogeneous_static(const SpanningTreeNetwork& tree,
                                       const DelayAssignment& delays, const AgentModel& agent,
                                       const StaticProtocol& protocol,
                                       const std::vector<Vector>& initial_states,
                                       const SimConfig& config) {
  agent.validate();
  if (agent.C.rows() != agent.n() ||
      !agent.C.isApprox(Matrix::Identity(agent.n(), agent.n()), 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "full-state coupling requires C = I");
  }
  const std::vector<AgentDynamics> dyn(tree.size(), static_closed_loop(agent, protocol));
  return simulate_network(tree, delays, dyn, initial_states, config);
}

Trajectory simulate_homogeneous_dynamic(const SpanningTreeNetwork& tree,
                                        const DelayAssignment& delays, const AgentModel& agent,
                                        const DynamicProtocol& protocol,
                                        const std::vector<Vector>& initial_states,
                                        const std::vector<Vector>& initial_controller_states,
                                        const SimConfig& config) {
  const AgentDynamics loop = dynamic_closed_loop(agent, protocol);
  const int N = tree.size();
  if (static_cast<int>(initial_states.size()) != N) {
    throw Error(ErrorKind::DimensionMismatch, "one initial state per agent");
  }
  if (!initial_controller_states.empty() && static_cast<int>(initial_controller_states.size()) != N) {
    throw Error(ErrorKind::DimensionMismatch, "one initial controller state per agent");
  }
  const int n = agent.n(), nc = loop.dim() - n;
  std::vector<Vector> z0;
  for (int i = 0; i < N; ++i) {
    if (initial_states[i].size() != n) {
      throw Error(ErrorKind::DimensionMismatch, "initial state has wrong size");
    }
    Vector z = Vector::Zero(n + nc);
    z.head(n) = initial_states[i];
    if (!initial_controller_states.empty()) {
      if (initial_controller_states[i].size() != nc) {
        throw Error(ErrorKind::DimensionMismatch, "initial controller state has wrong size");
      }
      z.tail(nc) = initial_controller_states[i];
    }
    z0.push_back(z);
  }
  const std::vector<AgentDynamics> dyn(N, loop);
  return simulate_network(tree, delays, dyn, z0, config);
}

Trajectory simulate_heterogeneous(const SpanningTreeNetwork& tree, const DelayAssignment& delays,
                                  const std::vector<AgentModel>& agents, const HeteroDesign& design,
                                  const std::vector<Vector>& initial_states, const SimConfig& config,
                                  HeteroFrame frame) {
  const int N = tree.size();
  if (static_cast<int>(agents.size()) != N || static_cast<int>(initial_states.size()) != N) {
    throw Error(ErrorKind::DimensionMismatch, "one agent model and initial state per agent");
  }
  std::vector<AgentDynamics> dyn;
  std::vector<Vector> z0;
  dyn.push_back(hetero_root_loop(agents[0], design.p));
  z0.push_back(initial_states[0]);
  for (int i = 1; i < N; ++i) {
    dyn.push_back(hetero_follower_loop(agents[i], design.controller_for(i), design.observer));
    Vector z = Vector::Zero(dyn.back().dim());
    if (initial_states[i].size() != agents[i].n()) {
      throw Error(ErrorKind::DimensionMismatch,
                  "initial state of agent " + std::to_string(i + 1) + " has wrong size");
    }
    z.head(agents[i].n()) = initial_states[i];
    z0.push_back(z);
  }
  if (initial_states[0].size() != agents[0].n()) {
    throw Error(ErrorKind::DimensionMismatch, "initial state of agent 1 has wrong size");
  }
  if (frame == HeteroFrame::Delayed) return simulate_network(tree, delays, dyn, z0, config);

  DelayAssignment none = delays;
  for (auto& [edge, tau] : none.edge_delays) tau = 0.0;
  none.root_delays.setZero();
  SimConfig shifted = config;
  shifted.history.clear();
  return simulate_network(tree, none, dyn, z0, shifted);
}

Trajectory shift_by_root_delays(const Trajectory& traj, const DelayAssignment& delays) {
  if (delays.root_delays.size() != traj.agents()) {
    throw Error(ErrorKind::DimensionMismatch, "delay assignment does not match the trajectory");
  }
  const double window = traj.end_time() - delays.max_root_delay();
  if (!(window > 0.0)) {
    throw Error(ErrorKind::HorizonTooShort,
                "horizon " + format_double(traj.end_time()) +
                    " does not exceed the largest cumulative delay " +
                    format_double(delays.max_root_delay()));
  }
  const double dt = traj.dt();
  const int samples = static_cast<int>(std::floor(window / dt + kSnap)) + 1;
  Trajectory out = Trajectory::with_layout_of(traj, dt, 0, samples);
  for (int a = 0; a < traj.agents(); ++a) {
    const double shift = delays.root_delays(a);
    for (int k = 0; k < samples; ++k) {
      const double t = k * dt + shift;
      out.set_sample(a, k, traj.state_at(a, t));
      out.set_rate(a, k, traj.rate_at(a, t));
      out.set_input(a, k, traj.input_at(a, t));
    }
    out.set_left_rate_at_zero(a, out.rate(a, 0));
  }
  out.set_filled(samples);
  return out;
}

void write_trajectory_csv(const Trajectory& traj, const std::filesystem::path& path,
                          const std::string& kind) {
  enum class Part { State, Controller, Input, Output };
  Part part;
  if (kind == "state") part = Part::State;
  else if (kind == "controller") part = Part::Controller;
  else if (kind == "input") part = Part::Input;
  else if (kind == "output") part = Part::Output;
  else throw Error(ErrorKind::InvalidArgument, "unknown trajectory column kind '" + kind + "'");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << "t,agent," << kind << "_index,value\n";
  for (int k = 0; k < traj.samples(); ++k) {
    const std::string t = format_double(traj.times()[k]);
    for (int a = 0; a < traj.agents(); ++a) {
      Vector v;
      switch (part) {
        case Part::State: v = traj.plant_state(a, k); break;
        case Part::Controller: v = traj.controller_state(a, k); break;
        case Part::Input: v = traj.input(a, k); break;
        case Part::Output: v = traj.output(a, k); break;
      }
      for (Eigen::Index j = 0; j < v.size(); ++j) {
        out << t << ',' << a + 1 << ',' << j + 1 << ',' << format_double(v(j)) << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorKind::InvalidArgument, "failed writing " + path.string());
}

}  // namespace delaysync
