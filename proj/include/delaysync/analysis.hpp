#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "delaysync/ddesim.hpp"
#include "delaysync/matops.hpp"
#include "delaysync/netgraph.hpp"
#include "delaysync/protocols.hpp"

namespace delaysync {

/// Scalar time series on (a subset of) a trajectory grid.
struct ErrorCurve {
  std::vector<double> times;
  std::vector<double> values;

  bool empty() const { return values.empty(); }
  double terminal() const;
  double peak() const;
};

enum class PairMode {
  /// Only tree edges (i, parent(i)) with their physical delay.
  TreeEdges,
  /// Every ordered pair with lag tau_bar_i - tau_bar_j; negative lags look
  /// forward in time, so the curve ends max tau_bar before the horizon.
  AllPairs,
};

/// max over pairs of || x_i(t) - x_j(t - tau_ij) || for every sample t >= 0
/// where all lagged values are available.
ErrorCurve delayed_state_sync_error(const Trajectory& traj, const SpanningTreeNetwork& tree,
                                    const DelayAssignment& delays,
                                    PairMode mode = PairMode::TreeEdges);

/// Same with outputs y_i.
ErrorCurve delayed_output_sync_error(const Trajectory& traj, const SpanningTreeNetwork& tree,
                                     const DelayAssignment& delays,
                                     PairMode mode = PairMode::TreeEdges);

struct TrajectoryDeviation {
  /// max over agents of || x~_i(t) - x_s(t) || on the shifted window.
  ErrorCurve deviation;
  /// max over the window of || x_s(t) ||.
  double reference_peak = 0.0;
};

/// Compares the shifted plant states against x_s(t) = [I 0] e^{M t} z_1(0),
/// where M is the root's closed-loop matrix (plant first). Throws
/// HorizonTooShort when no window remains after shifting.
TrajectoryDeviation synchronized_trajectory_check(const Trajectory& traj,
                                                  const Matrix& root_closed_loop,
                                                  const DelayAssignment& delays);

struct SpectralCertificate {
  std::string description;
  int agent = -1;     // zero-based; -1 when not agent specific
  double ell = 0.0;   // l_ii used, 0 when not applicable
  double abscissa = 0.0;
};

/// A + l_ii B F for every follower.
std::vector<SpectralCertificate> static_certificates(const SpanningTreeNetwork& tree,
                                                     const AgentModel& agent,
                                                     const StaticProtocol& protocol);

/// [[A + l B Dc C, B Cc], [l Bc C, Ac]] for every follower.
std::vector<SpectralCertificate> dynamic_certificates(const SpanningTreeNetwork& tree,
                                                      const AgentModel& agent,
                                                      const DynamicProtocol& protocol);

/// Observer error matrices, A_i + B_i K_i and the observer-local loops.
std::vector<SpectralCertificate> hetero_certificates(const SpanningTreeNetwork& tree,
                                                     const std::vector<AgentModel>& agents,
                                                     const HeteroDesign& design);

struct LyapunovCheck {
  bool pass = false;
  double slack = 0.0;  // -(max eigenvalue of the left side plus Q)
};

/// (A - l rho B B^T P)^T P + P (A - l rho B B^T P) + Q <= 0 up to 1e-9.
LyapunovCheck lyapunov_inequality_check(const Matrix& A, const Matrix& B, const Matrix& P,
                                        const Matrix& Q, double ell, double rho);

struct DecayFit {
  double rate = 0.0;   // mu' in err ~ exp(-mu' t)
  int points = 0;      // samples above the noise floor that entered the fit
  bool at_noise_floor = false;
};

/// Least-squares fit of log(err) over the last third of the curve, using only
/// values above `noise_floor`. With fewer than three such samples the error is
/// reported as already at the noise floor.
DecayFit decay_rate_fit(const ErrorCurve& curve, double noise_floor = 1e-12);

struct SyncTolerances {
  double terminal_error = 1e-3;       // relative: err <= tol (1 + reference peak)
  double certificate_margin = 1e-9;   // abscissas must be < -margin
};

struct SyncReport {
  std::string mode;
  ErrorCurve delayed_error;
  double terminal_error = 0.0;
  /// Peak norm of the synchronized trajectory (or the root output).
  double reference_peak = 0.0;
  std::optional<TrajectoryDeviation> trajectory;
  double terminal_deviation = 0.0;
  double max_deviation = 0.0;
  std::vector<SpectralCertificate> certificates;
  DecayFit decay;
  SyncTolerances tolerances;
  bool verdict = false;
  std::vector<std::string> failures;
};

/// Fills terminal values, the decay fit, the verdict and the failure list.
void finalize_report(SyncReport& report);

/// Flat `key = value` text, one entry per line, deterministic order.
std::string serialize_report(const SyncReport& report);

/// CSV with header `t,value`.
void write_error_curve_csv(const ErrorCurve& curve, const std::filesystem::path& path);

}  // namespace delaysync
