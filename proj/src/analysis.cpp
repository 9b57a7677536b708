#include "delaysync/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "delaysync/error.hpp"
#include "delaysync/textio.hpp"

namespace delaysync {
namespace {

struct LaggedPair {
  int i, j;
  double lag;
};

std::vector<LaggedPair> pairs_for(const SpanningTreeNetwork& tree, const DelayAssignment& delays,
                                  PairMode mode) {
  std::vector<LaggedPair> pairs;
  const int N = tree.size();
  if (delays.root_delays.size() != N) {
    throw Error(ErrorKind::DimensionMismatch, "delay assignment does not match the network");
  }
  if (mode == PairMode::TreeEdges) {
    for (int i = 0; i < N; ++i) {
      const int p = tree.parent(i);
      if (p >= 0) pairs.push_back({i, p, delays.edge_delay(i, p)});
    }
  } else {
    for (int i = 0; i < N; ++i) {
      for (int j = 0; j < N; ++j) {
        if (i != j) pairs.push_back({i, j, delays.root_delays(i) - delays.root_delays(j)});
      }
    }
  }
  return pairs;
}

template <typename Extract>
ErrorCurve lagged_error(const Trajectory& traj, const std::vector<LaggedPair>& pairs,
                        Extract&& extract) {
  ErrorCurve curve;
  if (pairs.empty()) {
    for (int k = traj.zero_index(); k < traj.samples(); ++k) {
      curve.times.push_back(traj.times()[k]);
      curve.values.push_back(0.0);
    }
    return curve;
  }
  double min_lag = std::numeric_limits<double>::infinity();
  for (const auto& p : pairs) min_lag = std::min(min_lag, p.lag);
  const double last = traj.end_time() + std::min(0.0, min_lag);
  for (int k = traj.zero_index(); k < traj.samples(); ++k) {
    const double t = traj.times()[k];
    if (t > last + 1e-9 * traj.dt()) break;
    double worst = 0.0;
    for (const auto& p : pairs) {
      const Vector diff = extract(p.i, t) - extract(p.j, t - p.lag);
      worst = std::max(worst, diff.norm());
    }
    curve.times.push_back(t);
    curve.values.push_back(worst);
  }
  return curve;
}

}  // namespace

double ErrorCurve::terminal() const {
  if (values.empty()) throw Error(ErrorKind::HorizonTooShort, "empty error curve");
  return values.back();
}

double ErrorCurve::peak() const {
  return values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
}

ErrorCurve delayed_state_sync_error(const Trajectory& traj, const SpanningTreeNetwork& tree,
                                    const DelayAssignment& delays, PairMode mode) {
  return lagged_error(traj, pairs_for(tree, delays, mode),
                      [&](int a, double t) { return traj.plant_state_at(a, t); });
}

ErrorCurve delayed_output_sync_error(const Trajectory& traj, const SpanningTreeNetwork& tree,
                                     const DelayAssignment& delays, PairMode mode) {
  return lagged_error(traj, pairs_for(tree, delays, mode),
                      [&](int a, double t) { return traj.output_at(a, t); });
}

TrajectoryDeviation synchronized_trajectory_check(const Trajectory& traj,
                                                  const Matrix& root_closed_loop,
                                                  const DelayAssignment& delays) {
  if (root_closed_loop.rows() != traj.dim(0) || root_closed_loop.cols() != traj.dim(0)) {
    throw Error(ErrorKind::DimensionMismatch, "root closed-loop matrix does not match agent 1");
  }
  const Trajectory shifted = shift_by_root_delays(traj, delays);
  const Vector z1 = traj.state(0, traj.zero_index());
  const int n = traj.plant_dim(0);
  TrajectoryDeviation out;
  for (int k = 0; k < shifted.samples(); ++k) {
    const double t = shifted.times()[k];
    const Vector xs = (matrix_exponential(root_closed_loop, t) * z1).head(n);
    out.reference_peak = std::max(out.reference_peak, xs.norm());
    double worst = 0.0;
    for (int a = 0; a < shifted.agents(); ++a) {
      if (shifted.plant_dim(a) != n) {
        throw Error(ErrorKind::DimensionMismatch, "agents have different plant dimensions");
      }
      worst = std::max(worst, (shifted.plant_state(a, k) - xs).norm());
    }
    out.deviation.times.push_back(t);
    out.deviation.values.push_back(worst);
  }
  return out;
}

std::vector<SpectralCertificate> static_certificates(const SpanningTreeNetwork& tree,
                                                     const AgentModel& agent,
                                                     const StaticProtocol& protocol) {
  std::vector<SpectralCertificate> out;
  for (int i : tree.children_in_order()) {
    const double ell = tree.diagonal(i);
    const Matrix M = agent.A + ell * agent.B * protocol.F;
    out.push_back({"A + l_ii B F", i, ell, spectral_abscissa(M)});
  }
  return out;
}

std::vector<SpectralCertificate> dynamic_certificates(const SpanningTreeNetwork& tree,
                                                      const AgentModel& agent,
                                                      const DynamicProtocol& protocol) {
  std::vector<SpectralCertificate> out;
  const int n = agent.n(), nc = static_cast<int>(protocol.Ac.rows());
  for (int i : tree.children_in_order()) {
    const double ell = tree.diagonal(i);
    Matrix M(n + nc, n + nc);
    M << agent.A + ell * agent.B * protocol.Dc * agent.C, agent.B * protocol.Cc,
        ell * protocol.Bc * agent.C, protocol.Ac;
    out.push_back({"plant/controller subsystem at l_ii", i, ell, spectral_abscissa(M)});
  }
  return out;
}

std::vector<SpectralCertificate> hetero_certificates(const SpanningTreeNetwork& tree,
                                                     const std::vector<AgentModel>& agents,
                                                     const HeteroDesign& design) {
  std::vector<SpectralCertificate> out;
  for (std::size_t c = 0; c < design.controllers.size(); ++c) {
    const HeteroAgentController& ctrl = design.controllers[c];
    const int i = ctrl.agent;
    const AgentModel& a = agents[i];
    out.push_back({"A_i + B_i K_i", i, 0.0,
                   spectral_abscissa(a.A + a.B * ctrl.feedback.K)});
    out.push_back({"observer error matrix", i, tree.diagonal(i), design.observer.abscissa[c]});
  }
  return out;
}

LyapunovCheck lyapunov_inequality_check(const Matrix& A, const Matrix& B, const Matrix& P,
                                        const Matrix& Q, double ell, double rho) {
  const Matrix closed = A - ell * rho * B * B.transpose() * P;
  Matrix S = closed.transpose() * P + P * closed + Q;
  S = 0.5 * (S + S.transpose()).eval();
  const Eigen::SelfAdjointEigenSolver<Matrix> es(S, Eigen::EigenvaluesOnly);
  const double top = es.eigenvalues().maxCoeff();
  return {top <= 1e-9, -top};
}

DecayFit decay_rate_fit(const ErrorCurve& curve, double noise_floor) {
  DecayFit fit;
  if (curve.empty()) return fit;
  const double start = curve.times.front();
  const double cut = start + 2.0 * (curve.times.back() - start) / 3.0;
  double st = 0, sy = 0, stt = 0, sty = 0;
  int n = 0;
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    if (curve.times[k] < cut || !(curve.values[k] > noise_floor)) continue;
    const double t = curve.times[k], y = std::log(curve.values[k]);
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
    ++n;
  }
  fit.points = n;
  if (n < 3) {
    fit.at_noise_floor = true;
    return fit;
  }
  const double denom = n * stt - st * st;
  fit.rate = denom > 0.0 ? -(n * sty - st * sy) / denom : 0.0;
  return fit;
}

void finalize_report(SyncReport& report) {
  report.failures.clear();
  report.terminal_error = report.delayed_error.empty() ? 0.0 : report.delayed_error.terminal();
  report.decay = decay_rate_fit(report.delayed_error);
  const double bound = report.tolerances.terminal_error * (1.0 + report.reference_peak);
  if (report.delayed_error.empty()) report.failures.push_back("delayed error curve is empty");
  if (!(report.terminal_error <= bound)) {
    report.failures.push_back("terminal delayed error " + format_double(report.terminal_error) +
                              " exceeds " + format_double(bound));
  }
  if (report.trajectory) {
    const ErrorCurve& dev = report.trajectory->deviation;
    report.terminal_deviation = dev.empty() ? 0.0 : dev.terminal();
    report.max_deviation = dev.peak();
    if (!(report.terminal_deviation <= bound)) {
      report.failures.push_back("synchronized trajectory deviation " +
                                format_double(report.terminal_deviation) + " exceeds " +
                                format_double(bound));
    }
  }
  for (const auto& c : report.certificates) {
    if (!(c.abscissa < -report.tolerances.certificate_margin)) {
      report.failures.push_back("certificate '" + c.description + "' for agent " +
                                std::to_string(c.agent + 1) + " has abscissa " +
                                format_double(c.abscissa));
    }
  }
  report.verdict = report.failures.empty();
}

std::string serialize_report(const SyncReport& report) {
  std::ostringstream os;
  os << "mode = " << report.mode << '\n';
  os << "verdict = " << (report.verdict ? "pass" : "fail") << '\n';
  os << "terminal_delayed_error = " << format_double(report.terminal_error) << '\n';
  os << "peak_delayed_error = " << format_double(report.delayed_error.peak()) << '\n';
  os << "reference_peak = " << format_double(report.reference_peak) << '\n';
  os << "tolerance.terminal_error = " << format_double(report.tolerances.terminal_error) << '\n';
  os << "tolerance.certificate_margin = " << format_double(report.tolerances.certificate_margin)
     << '\n';
  os << "error_bound = "
     << format_double(report.tolerances.terminal_error * (1.0 + report.reference_peak)) << '\n';
  if (report.trajectory) {
    os << "terminal_trajectory_deviation = " << format_double(report.terminal_deviation) << '\n';
    os << "max_trajectory_deviation = " << format_double(report.max_deviation) << '\n';
  }
  os << "decay.points = " << report.decay.points << '\n';
  os << "decay.at_noise_floor = " << (report.decay.at_noise_floor ? "true" : "false") << '\n';
  os << "decay.rate = " << format_double(report.decay.rate) << '\n';
  os << "certificates = " << report.certificates.size() << '\n';
  for (std::size_t k = 0; k < report.certificates.size(); ++k) {
    const auto& c = report.certificates[k];
    const std::string key = "certificate." + std::to_string(k + 1);
    os << key << ".description = " << c.description << '\n';
    os << key << ".agent = " << c.agent + 1 << '\n';
    os << key << ".l_ii = " << format_double(c.ell) << '\n';
    os << key << ".abscissa = " << format_double(c.abscissa) << '\n';
  }
  os << "failures = " << report.failures.size() << '\n';
  for (std::size_t k = 0; k < report.failures.size(); ++k) {
    os << "failure." << k + 1 << " = " << report.failures[k] << '\n';
  }
  return os.str();
}

void write_error_curve_csv(const ErrorCurve& curve, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidArgument, "cannot write " + path.string());
  out << "t,value\n";
  for (std::size_t k = 0; k < curve.values.size(); ++k) {
    out << format_double(curve.times[k]) << ',' << format_double(curve.values[k]) << '\n';
  }
}

}  // namespace delaysync
