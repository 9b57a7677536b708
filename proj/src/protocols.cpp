#include "delaysync/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "delaysync/error.hpp"

namespace delaysync {

namespace {

// Tolerance for "eigenvalue in the closed left half plane"; defective
// eigenvalues on the imaginary axis are only resolved to ~sqrt(eps).
constexpr double kAssumptionTol = 1e-6;

void require_closed_left_half_plane(const Matrix& A, const std::string& who) {
  const double abscissa = spectral_abscissa(A);
  if (abscissa > kAssumptionTol * (1.0 + norm2(A))) {
    throw Error(ErrorKind::AssumptionViolation,
                who + " has an eigenvalue with positive real part " + std::to_string(abscissa));
  }
}

void require_positive_definite(const Matrix& Q, const char* name) {
  if (Q.rows() != Q.cols()) throw Error(ErrorKind::DimensionMismatch, std::string(name) + " must be square");
  if ((Q - Q.transpose()).norm() > 1e-12 * (1.0 + Q.norm())) {
    throw Error(ErrorKind::InvalidArgument, std::string(name) + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> es(Q);
  if (Q.rows() > 0 && es.eigenvalues().minCoeff() <= 0.0) {
    throw Error(ErrorKind::InvalidArgument, std::string(name) + " must be positive definite");
  }
}

double min_singular_value(const Matrix& M) {
  if (M.cols() == 0) return 1.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(svd.singularValues().size() - 1);
}

// Appends identity columns to U (n x q, full column rank) until square,
// each time taking the column that maximizes the smallest singular value.
Matrix complete_basis(const Matrix& U) {
  const Eigen::Index n = U.rows();
  Matrix basis = U;
  std::vector<bool> used(n, false);
  while (basis.cols() < n) {
    Eigen::Index best = -1;
    double best_sigma = -1.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (used[j]) continue;
      Matrix trial(n, basis.cols() + 1);
      trial << basis, Matrix::Identity(n, n).col(j);
      const double sigma = min_singular_value(trial);
      if (sigma > best_sigma + 1e-14) {
        best_sigma = sigma;
        best = j;
      }
    }
    used[best] = true;
    Matrix next(n, basis.cols() + 1);
    next << basis, Matrix::Identity(n, n).col(best);
    basis = std::move(next);
  }
  if (n > 0 && min_singular_value(basis) < 1e-10) {
    throw Error(ErrorKind::CompletionFailed, "no nonsingular basis completion found");
  }
  return basis;
}

}  // namespace

void AgentModel::validate() const {
  if (A.rows() == 0 || A.rows() != A.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "A must be square and non-empty");
  }
  if (B.rows() != A.rows() || B.cols() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "B must have n rows and at least one column");
  }
  if (C.cols() != A.rows() || C.rows() == 0) {
    throw Error(ErrorKind::DimensionMismatch, "C must have n columns and at least one row");
  }
  if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
    throw Error(ErrorKind::InvalidArgument, "agent matrices must be finite");
  }
}

// ---------------------------------------------------------------------------

StaticProtocol design_static_full_state(const Matrix& A, const Matrix& B, double beta,
                                        const Matrix& Q_design, std::optional<double> rho) {
  if (A.rows() == 0 || A.rows() != A.cols() || B.rows() != A.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "A must be square with B of matching rows");
  }
  if (Q_design.rows() != A.rows()) throw Error(ErrorKind::DimensionMismatch, "Q must match A");
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be positive");
  require_positive_definite(Q_design, "Q");
  const double rho_min = 1.0 / (2.0 * beta);
  if (rho && *rho < rho_min * (1.0 - 1e-12)) {
    throw Error(ErrorKind::InvalidArgument,
                "rho must be at least 1/(2 beta) = " + std::to_string(rho_min));
  }
  require_closed_left_half_plane(A, "A");

  StaticProtocol out;
  out.rho = rho.value_or(rho_min);
  out.Q_design = Q_design;
  out.P = solve_care(A, B, Q_design).P;
  out.F = -out.rho * B.transpose() * out.P;

  // (A - l rho B B^T P)^T P + P (A - l rho B B^T P) <= -Q at l = beta, 10 beta.
  for (double ell : {beta, 10.0 * beta}) {
    const Matrix closed = A + ell * B * out.F;
    const Matrix lhs = closed.transpose() * out.P + out.P * closed + Q_design;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (lhs + lhs.transpose()));
    if (es.eigenvalues().maxCoeff() > 1e-9 * (1.0 + norm2(Q_design))) {
      throw Error(ErrorKind::NoConvergence, "Lyapunov certificate failed at l = " +
                                                std::to_string(ell));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Matrix coupled_error_matrix(const Matrix& A, const Matrix& B, const Matrix& C,
                            const Matrix& K, const Matrix& P_delta, double beta, double ell) {
  const Eigen::Index n = A.rows();
  const Matrix g = (ell / beta) * B * B.transpose() * P_delta;
  Matrix out(2 * n, 2 * n);
  out << A - g, g, -g, A + K * C + g;
  return out;
}

DynamicProtocol design_dynamic_partial_state(const Matrix& A, const Matrix& B, const Matrix& C,
                                             double beta, double alpha,
                                             const DynamicDesignOptions& options) {
  const AgentModel model{A, B, C};
  model.validate();
  if (!(beta > 0.0) || !(alpha > beta)) {
    throw Error(ErrorKind::InvalidArgument, "need alpha > beta > 0");
  }
  if (!(options.delta_init > 0.0)) throw Error(ErrorKind::InvalidArgument, "delta_init must be positive");
  if (options.grid_points < 2) throw Error(ErrorKind::InvalidArgument, "grid needs both endpoints");
  require_closed_left_half_plane(A, "A");
  if (!is_observable(A, C)) throw Error(ErrorKind::NotObservable, "(A, C) is not observable");

  const Eigen::Index n = A.rows();
  DynamicProtocol out;
  out.K = stabilizing_output_injection(A, C);

  double delta = options.delta_init;
  for (int h = 0; h <= options.max_halvings; ++h, delta *= 0.5) {
    const Matrix P = solve_care(A, B, delta * Matrix::Identity(n, n)).P;
    double worst = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (int g = 0; g < options.grid_points && ok; ++g) {
      const double ell = beta + (alpha - beta) * g / (options.grid_points - 1);
      const HurwitzCheck check =
          is_hurwitz(coupled_error_matrix(A, B, C, out.K, P, beta, ell), options.margin);
      worst = std::max(worst, check.abscissa);
      ok = check.stable;
    }
    if (ok) {
      out.delta = delta;
      out.halvings = h;
      out.P_delta = P;
      out.grid_abscissa = worst;
      out.Ac = A + out.K * C;
      out.Bc = -out.K;
      out.Cc = -(1.0 / beta) * B.transpose() * P;
      out.Dc = Matrix::Zero(B.cols(), C.rows());
      return out;
    }
  }
  throw Error(ErrorKind::NoDeltaFound, "no low-gain parameter certified after " +
                                           std::to_string(options.max_halvings) + " halvings");
}

// ---------------------------------------------------------------------------

ErrorSystem hetero_error_system(const AgentModel& agent, const AgentModel& root) {
  agent.validate();
  root.validate();
  if (agent.p() != root.p()) {
    throw Error(ErrorKind::DimensionMismatch, "follower and root output dimensions differ");
  }
  const int ni = agent.n(), n1 = root.n();
  ErrorSystem sys;
  sys.A = Matrix::Zero(ni + n1, ni + n1);
  sys.A.topLeftCorner(ni, ni) = agent.A;
  sys.A.bottomRightCorner(n1, n1) = root.A;
  sys.B = Matrix::Zero(ni + n1, agent.m());
  sys.B.topRows(ni) = agent.B;
  sys.C.resize(agent.p(), ni + n1);
  sys.C << agent.C, -root.C;
  return sys;
}

HeteroTransform hetero_transform(const AgentModel& agent, const AgentModel& root) {
  const ErrorSystem sys = hetero_error_system(agent, root);
  if (!is_observable(agent.A, agent.C)) {
    throw Error(ErrorKind::NotObservable, "(A_i, C_i) is not observable");
  }
  if (!is_observable(root.A, root.C)) {
    throw Error(ErrorKind::NotObservable, "(A_1, C_1) is not observable");
  }
  const int ni = agent.n(), n1 = root.n();

  HeteroTransform tr;
  const Matrix shared = null_space_basis(observability_matrix(sys.A, sys.C, ni + n1));
  tr.q = static_cast<int>(shared.cols());
  tr.k = n1 - tr.q;
  if (tr.k < 0) throw Error(ErrorKind::CompletionFailed, "shared-mode dimension exceeds n_1");
  tr.Lambda = complete_basis(shared.topRows(ni));
  tr.Phi = complete_basis(shared.bottomRows(n1));

  tr.M = Matrix::Zero(ni, n1);
  tr.M.topLeftCorner(tr.q, tr.q).setIdentity();
  tr.N = Matrix::Zero(tr.k, n1);
  tr.N.rightCols(tr.k).setIdentity();

  const Matrix Phi_inv = tr.Phi.partialPivLu().inverse();
  const Matrix J = Phi_inv * root.A * tr.Phi;  // block upper triangular in exact arithmetic
  tr.A22 = tr.N * J * tr.N.transpose();
  tr.A12 = tr.Lambda * tr.M * J * tr.N.transpose();
  tr.C2 = -root.C * tr.Phi * tr.N.transpose();

  const int nx = ni + tr.k;
  tr.Abar = Matrix::Zero(nx, nx);
  tr.Abar.topLeftCorner(ni, ni) = agent.A;
  tr.Abar.topRightCorner(ni, tr.k) = tr.A12;
  tr.Abar.bottomRightCorner(tr.k, tr.k) = tr.A22;
  tr.Bbar = Matrix::Zero(nx, agent.m());
  tr.Bbar.topRows(ni) = agent.B;
  tr.Cbar.resize(agent.p(), nx);
  tr.Cbar << agent.C, -tr.C2;

  tr.T = Matrix::Zero(nx, ni + n1);
  tr.T.topLeftCorner(ni, ni).setIdentity();
  tr.T.topRightCorner(ni, n1) = -tr.Lambda * tr.M * Phi_inv;
  tr.T.bottomRightCorner(tr.k, n1) = -tr.N * Phi_inv;

  tr.conjugation_residual = norm2(tr.T * sys.A - tr.Abar * tr.T) +
                            norm2(tr.T * sys.B - tr.Bbar) + norm2(tr.Cbar * tr.T - sys.C);
  return tr;
}

Matrix chain_matrix(int p, int nbar) {
  Matrix Ao = Matrix::Zero(p * nbar, p * nbar);
  if (nbar > 1) Ao.topRightCorner(p * (nbar - 1), p * (nbar - 1)).setIdentity();
  return Ao;
}

Matrix high_gain_scaling(int p, int nbar, double epsilon) {
  Vector d(p * nbar);
  for (int k = 0; k < nbar; ++k) d.segment(k * p, p).setConstant(std::pow(epsilon, -(k + 1)));
  return d.asDiagonal();
}

ChainForm build_chain_form(const Matrix& Abar, const Matrix& Bbar, const Matrix& Cbar, int nbar) {
  if (nbar < 1) throw Error(ErrorKind::InvalidArgument, "nbar must be >= 1");
  if (Abar.rows() != Abar.cols() || Bbar.rows() != Abar.rows() || Cbar.cols() != Abar.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "chain form input dimensions inconsistent");
  }
  const int p = static_cast<int>(Cbar.rows());
  const int nx = static_cast<int>(Abar.rows());

  ChainForm cf;
  cf.nbar = nbar;
  cf.p = p;
  cf.Xi = observability_matrix(Abar, Cbar, nbar);
  if (numerical_rank(cf.Xi) < nx) {
    throw Error(ErrorKind::NotObservable, "Xi is not injective (Xi^T Xi singular)");
  }
  cf.Xi_left_inverse = (cf.Xi.transpose() * cf.Xi).ldlt().solve(cf.Xi.transpose());
  Matrix Apow = Matrix::Identity(nx, nx);
  for (int k = 0; k < nbar; ++k) Apow = Apow * Abar;
  cf.G = Cbar * Apow * cf.Xi_left_inverse;
  cf.Ao = chain_matrix(p, nbar);
  cf.Co = Matrix::Zero(p, p * nbar);
  cf.Co.leftCols(p).setIdentity();
  cf.Ko = Matrix::Zero(p * nbar, p * nbar);
  cf.Ko.bottomRows(p) = cf.G;
  cf.Bo = cf.Xi * Bbar;
  cf.intertwining_residual = norm2((cf.Ao + cf.Ko) * cf.Xi - cf.Xi * Abar);
  return cf;
}

HeteroObserver design_hetero_observer(const std::vector<ChainForm>& chains,
                                      const std::vector<double>& ell, double beta,
                                      const Matrix& K, const ObserverDesignOptions& options) {
  if (chains.empty()) throw Error(ErrorKind::InvalidArgument, "no followers to design for");
  if (chains.size() != ell.size()) throw Error(ErrorKind::DimensionMismatch, "one l_ii per chain");
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be positive");
  const int p = chains.front().p, nbar = chains.front().nbar;
  for (const auto& c : chains) {
    if (c.p != p || c.nbar != nbar) {
      throw Error(ErrorKind::DimensionMismatch, "chain forms must share p and nbar");
    }
  }
  for (double l : ell) {
    if (l < beta) throw Error(ErrorKind::BoundViolation, "beta must not exceed any l_ii");
  }
  const int dim = p * nbar;
  const Matrix shape = K.size() == 0 ? Matrix::Zero(p, dim) : K;
  if (shape.rows() != p || shape.cols() != dim) {
    throw Error(ErrorKind::DimensionMismatch, "K must be p x p*nbar");
  }
  const Matrix Ao = chain_matrix(p, nbar);
  const Matrix& Co = chains.front().Co;
  const Matrix CtC = Co.transpose() * Co;

  // eps^{nbar+1} H_eps without forming the (possibly huge) H_eps first.
  auto scaled_h = [&](double eps) {
    Vector d(dim);
    for (int k = 0; k < nbar; ++k) d.segment(k * p, p).setConstant(std::pow(eps, nbar - k));
    return Matrix(d.asDiagonal());
  };

  double eps = options.epsilon_init;
  if (!(eps > 0.0)) throw Error(ErrorKind::InvalidArgument, "epsilon_init must be positive");
  for (int h = 0; h <= options.max_halvings; ++h, eps *= 0.5) {
    HeteroObserver obs;
    obs.epsilon = eps;
    obs.halvings = h;
    obs.K = shape;
    obs.H_eps = high_gain_scaling(p, nbar, eps);
    const Matrix sh = scaled_h(eps);
    obs.K_eps = Matrix::Zero(dim, dim);
    obs.K_eps.bottomRows(p) = shape * sh;
    if (!is_observable(Ao + obs.K_eps, Co)) {
      throw Error(ErrorKind::NotObservable, "(Ao + K_eps, Co) is not observable");
    }
    obs.Q_eps = solve_filter_care(Ao + obs.K_eps, Co, beta).P;

    bool ok = true;
    for (std::size_t i = 0; i < chains.size(); ++i) {
      Matrix Ki = Matrix::Zero(dim, dim);
      Ki.bottomRows(p) = (shape - chains[i].G) * sh;
      const double mismatch = 2.0 * norm2(Ki * obs.Q_eps);
      const HurwitzCheck hc =
          is_hurwitz(Ao + obs.K_eps - ell[i] * obs.Q_eps * CtC - Ki, options.margin);
      obs.K_eps_agent.push_back(Ki);
      obs.mismatch_norm.push_back(mismatch);
      obs.abscissa.push_back(hc.abscissa);
      ok = ok && mismatch <= 1.0 && hc.stable;
    }
    if (ok) return obs;
  }
  throw Error(ErrorKind::NoEpsilonFound, "no high-gain parameter certified after " +
                                             std::to_string(options.max_halvings) + " halvings");
}

bool rosenbrock_rank_check(const Matrix& A, const Matrix& B, const Matrix& C,
                           std::complex<double> lambda) {
  const Eigen::Index n = A.rows(), m = B.cols(), p = C.rows();
  Eigen::MatrixXcd R = Eigen::MatrixXcd::Zero(n + p, n + m);
  R.topLeftCorner(n, n) = A.cast<std::complex<double>>() - lambda * Eigen::MatrixXcd::Identity(n, n);
  R.topRightCorner(n, m) = B.cast<std::complex<double>>();
  R.bottomLeftCorner(p, n) = C.cast<std::complex<double>>();
  return numerical_rank(R) == n + p;
}

HeteroFeedback design_hetero_feedback(const AgentModel& agent, const Matrix& A12,
                                      const Matrix& A22, const Matrix& C2) {
  agent.validate();
  HeteroFeedback fb;
  fb.K = stabilizing_state_feedback(agent.A, agent.B);
  const ComplexVector modes = eigenvalues(A22);
  for (Eigen::Index j = 0; j < modes.size(); ++j) {
    if (!rosenbrock_rank_check(agent.A, agent.B, agent.C, modes(j))) {
      throw Error(ErrorKind::RankDeficient,
                  "invariant zero coincides with exosystem eigenvalue (" +
                      std::to_string(modes(j).real()) + ", " + std::to_string(modes(j).imag()) + ")");
    }
  }
  const RegulatorSolution reg = solve_regulator(agent.A, agent.B, agent.C, A12, A22, C2);
  fb.Pi = reg.Pi;
  fb.Gamma = reg.Gamma;
  fb.regulator_residual = reg.residual;
  fb.F.resize(agent.m(), agent.n() + A22.rows());
  fb.F << fb.K, fb.Gamma - fb.K * fb.Pi;
  return fb;
}

const HeteroAgentController& HeteroDesign::controller_for(int agent) const {
  for (const auto& c : controllers) {
    if (c.agent == agent) return c;
  }
  throw Error(ErrorKind::InvalidArgument, "no controller for agent " + std::to_string(agent + 1));
}

HeteroDesign design_heterogeneous(const std::vector<AgentModel>& agents,
                                  const SpanningTreeNetwork& tree,
                                  const HeteroDesignOptions& options) {
  if (static_cast<int>(agents.size()) != tree.size()) {
    throw Error(ErrorKind::DimensionMismatch, "one agent model per network node required");
  }
  if (agents.size() < 2) throw Error(ErrorKind::InvalidArgument, "need at least one follower");
  const AgentModel& root = agents.front();
  root.validate();
  require_closed_left_half_plane(root.A, "A_1");

  int required = 0;
  for (std::size_t i = 1; i < agents.size(); ++i) {
    agents[i].validate();
    require_closed_left_half_plane(agents[i].A, "A_" + std::to_string(i + 1));
    required = std::max(required, agents[i].n() + root.n());
  }
  HeteroDesign design;
  design.p = root.p();
  design.nbar = options.nbar.value_or(required);
  if (design.nbar < required) {
    throw Error(ErrorKind::InvalidArgument,
                "nbar must be at least max n_i + n_1 = " + std::to_string(required));
  }

  std::vector<ChainForm> chains;
  std::vector<double> ell;
  for (int i = 1; i < tree.size(); ++i) {
    HeteroAgentController ctrl;
    ctrl.agent = i;
    ctrl.transform = hetero_transform(agents[i], root);
    ctrl.chain = build_chain_form(ctrl.transform.Abar, ctrl.transform.Bbar, ctrl.transform.Cbar,
                                  design.nbar);
    ctrl.feedback = design_hetero_feedback(agents[i], ctrl.transform.A12, ctrl.transform.A22,
                                           ctrl.transform.C2);
    chains.push_back(ctrl.chain);
    ell.push_back(tree.diagonal(i));
    design.controllers.push_back(std::move(ctrl));
  }
  ObserverDesignOptions obs_options;
  obs_options.epsilon_init = options.epsilon_init;
  design.observer = design_hetero_observer(chains, ell, tree.beta(),
                                           options.K.value_or(Matrix()), obs_options);
  return design;
}

}  // namespace delaysync
