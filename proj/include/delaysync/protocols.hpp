#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "delaysync/matops.hpp"
#include "delaysync/netgraph.hpp"

namespace delaysync {

/// Linear agent x' = A x + B u, y = C x.
struct AgentModel {
  Matrix A, B, C;

  int n() const { return static_cast<int>(A.rows()); }
  int m() const { return static_cast<int>(B.cols()); }
  int p() const { return static_cast<int>(C.rows()); }

  /// Throws DimensionMismatch on inconsistent shapes or non-finite entries.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Homogeneous, full-state coupling: u_i = F zeta_i with F = -rho B^T P.

struct StaticProtocol {
  Matrix F;
  double rho = 0.0;
  Matrix P;
  Matrix Q_design;
};

/// Riccati-based static protocol. rho defaults to 1/(2 beta). Throws
/// AssumptionViolation for open right-half-plane eigenvalues of A.
StaticProtocol design_static_full_state(const Matrix& A, const Matrix& B, double beta,
                                        const Matrix& Q_design,
                                        std::optional<double> rho = {});

// ---------------------------------------------------------------------------
// Homogeneous, partial-state coupling: observer-based dynamic protocol
//   chi' = (A + K C) chi - K zeta,   u = -beta^{-1} B^T P_delta chi.

struct DynamicProtocol {
  Matrix Ac, Bc, Cc, Dc;
  double delta = 0.0;
  Matrix K;
  Matrix P_delta;
  /// Largest spectral abscissa of the coupled (x, e) matrix over the design grid.
  double grid_abscissa = 0.0;
  int halvings = 0;
};

struct DynamicDesignOptions {
  double delta_init = 1.0;
  int grid_points = 20;
  int max_halvings = 60;
  double margin = 1e-9;
};

/// Coupled plant/estimation-error matrix in (x, e) coordinates for a given l:
/// [[A - g, g], [-g, A + K C + g]] with g = l beta^{-1} B B^T P_delta.
Matrix coupled_error_matrix(const Matrix& A, const Matrix& B, const Matrix& C,
                            const Matrix& K, const Matrix& P_delta, double beta, double ell);

DynamicProtocol design_dynamic_partial_state(const Matrix& A, const Matrix& B, const Matrix& C,
                                             double beta, double alpha,
                                             const DynamicDesignOptions& options = {});

// ---------------------------------------------------------------------------
// Heterogeneous agents: output regulation relative to the root's output.

/// Block system of the follower/root pair driven by the follower's input,
/// with output e = C_i x_i - C_1 x_1.
struct ErrorSystem {
  Matrix A, B, C;
};

ErrorSystem hetero_error_system(const AgentModel& agent, const AgentModel& root);

/// Reduced coordinates xbar = T (x_i; x_1) separating the follower state
/// (minus the part shared with the root) from a k-dimensional exosystem.
struct HeteroTransform {
  Matrix Lambda, Phi;  // nonsingular completions of the shared-mode basis
  Matrix M, N;
  int q = 0;  // dimension of modes shared with the root
  int k = 0;  // exosystem dimension n_1 - q
  Matrix Abar, Bbar, Cbar;
  Matrix A12, A22, C2;
  Matrix T;  // (n_i + k) x (n_i + n_1)
  double conjugation_residual = 0.0;
};

HeteroTransform hetero_transform(const AgentModel& agent, const AgentModel& root);

/// Stacked-output chain form phi = Xi xbar.
struct ChainForm {
  int nbar = 0;
  int p = 0;
  Matrix Ao, Co;  // Brunovsky chain pair
  Matrix Bo;      // Xi Bbar
  Matrix Ko;      // [0; G]
  Matrix G;
  Matrix Xi;
  Matrix Xi_left_inverse;  // (Xi^T Xi)^{-1} Xi^T
  double intertwining_residual = 0.0;
};

ChainForm build_chain_form(const Matrix& Abar, const Matrix& Bbar, const Matrix& Cbar, int nbar);

/// p*nbar square chain matrix with identity superdiagonal blocks.
Matrix chain_matrix(int p, int nbar);
/// diag(eps^{-1} I_p, ..., eps^{-nbar} I_p).
Matrix high_gain_scaling(int p, int nbar, double epsilon);

struct HeteroObserver {
  double epsilon = 0.0;
  int halvings = 0;
  Matrix H_eps, Q_eps, K_eps;
  Matrix K;                         // p x p*nbar shaping matrix
  std::vector<Matrix> K_eps_agent;  // mismatch term per follower
  std::vector<double> mismatch_norm;  // 2 ||K_eps^i Q_eps|| per follower
  std::vector<double> abscissa;       // of Ao + K_eps - l_ii Q C^T C - K_eps^i
};

struct ObserverDesignOptions {
  double epsilon_init = 1.0;
  int max_halvings = 60;
  double margin = 1e-9;
};

/// chains[i] and ell[i] belong to the same follower. `K` may be empty (zero).
HeteroObserver design_hetero_observer(const std::vector<ChainForm>& chains,
                                      const std::vector<double>& ell, double beta,
                                      const Matrix& K, const ObserverDesignOptions& options = {});

struct HeteroFeedback {
  Matrix Pi, Gamma, K, F;
  double regulator_residual = 0.0;
};

HeteroFeedback design_hetero_feedback(const AgentModel& agent, const Matrix& A12,
                                      const Matrix& A22, const Matrix& C2);

/// rank [[A - lambda I, B], [C, 0]] == n + p (relative tolerance 1e-8).
bool rosenbrock_rank_check(const Matrix& A, const Matrix& B, const Matrix& C,
                           std::complex<double> lambda);

/// Everything follower i needs to run its observer-based regulator.
struct HeteroAgentController {
  int agent = 0;
  HeteroTransform transform;
  ChainForm chain;
  HeteroFeedback feedback;
};

struct HeteroDesign {
  int nbar = 0;
  int p = 0;
  std::vector<HeteroAgentController> controllers;  // one per non-root agent
  HeteroObserver observer;                         // shared H_eps, Q_eps, K_eps

  const HeteroAgentController& controller_for(int agent) const;
};

struct HeteroDesignOptions {
  std::optional<int> nbar;      // default max_i n_i + n_1
  std::optional<Matrix> K;      // default zero
  double epsilon_init = 1.0;
};

/// agents[0] is the root. Runs transform, chain form, observer and feedback
/// design for every follower.
HeteroDesign design_heterogeneous(const std::vector<AgentModel>& agents,
                                  const SpanningTreeNetwork& tree,
                                  const HeteroDesignOptions& options = {});

}  // namespace delaysync
