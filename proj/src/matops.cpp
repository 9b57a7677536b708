#include "delaysync/matops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "delaysync/error.hpp"
#include "delaysync/textio.hpp"

namespace delaysync {

namespace {

void require_square(const Matrix& A, const char* name) {
  if (A.rows() != A.cols()) {
    throw Error(ErrorKind::DimensionMismatch, std::string(name) + " must be square");
  }
}

Matrix symmetrize(const Matrix& X) { return 0.5 * (X + X.transpose()); }

Matrix pseudo_inverse_psd(const Matrix& Z, double rel_tol) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(Z));
  const Vector& lambda = es.eigenvalues();
  const double top = lambda.size() ? lambda.cwiseAbs().maxCoeff() : 0.0;
  Vector inv = Vector::Zero(lambda.size());
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    if (lambda(i) > rel_tol * top) inv(i) = 1.0 / lambda(i);
  }
  return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// PBH test: rank [A - lambda I, B] = n at every eigenvalue with Re >= -tol.
bool pbh_full_rank_on_unstable(const Matrix& A, const Matrix& B) {
  const Eigen::Index n = A.rows();
  const ComplexVector lambdas = eigenvalues(A);
  for (Eigen::Index k = 0; k < lambdas.size(); ++k) {
    if (lambdas(k).real() < -1e-9) continue;
    Eigen::MatrixXcd pencil(n, n + B.cols());
    pencil.leftCols(n) = A.cast<std::complex<double>>() -
                         lambdas(k) * Eigen::MatrixXcd::Identity(n, n);
    pencil.rightCols(B.cols()) = B.cast<std::complex<double>>();
    if (numerical_rank(pencil) < n) return false;
  }
  return true;
}

Matrix care_residual(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& P) {
  const Matrix PB = P * B;
  return A.transpose() * P + P * A - PB * PB.transpose() + Q;
}

// Stabilizing seed for Newton-Kleinman: K with A - B K Hurwitz.
Matrix initial_stabilizing_gain(const Matrix& A, const Matrix& B) {
  const Eigen::Index n = A.rows();
  if (is_hurwitz(A).stable) return Matrix::Zero(B.cols(), n);
  // Bass construction: when -(A + cI) is Hurwitz, (A + cI) Z + Z (A + cI)^T = 2 B B^T
  // has Z >= 0 with range equal to the controllable subspace, and K = B^T Z^+
  // moves the controllable modes onto Re s = -c. Small c keeps Z well
  // conditioned; larger shifts are tried if round-off spoils the first one.
  const ComplexVector lambdas = eigenvalues(A);
  const double leftmost = lambdas.size() ? lambdas.real().minCoeff() : 0.0;
  const double base = std::max(0.0, -leftmost) + 1.0;
  Matrix best = Matrix::Zero(B.cols(), n);
  double best_abscissa = std::numeric_limits<double>::infinity();
  for (double c : {base, 2.0 * base, norm2(A) + 1.0}) {
    const Matrix shifted = -(A + c * Matrix::Identity(n, n));
    Matrix Z;
    try {
      Z = solve_sylvester(shifted, shifted.transpose(), -2.0 * B * B.transpose());
    } catch (const Error&) {
      continue;
    }
    const Matrix K = B.transpose() * pseudo_inverse_psd(Z, 1e-12);
    const double abscissa = spectral_abscissa(A - B * K);
    if (abscissa < best_abscissa) {
      best = K;
      best_abscissa = abscissa;
    }
    if (abscissa < -1e-9) break;
  }
  return best;
}

}  // namespace

double norm2(const Eigen::Ref<const Matrix>& M) {
  if (M.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(M);
  return svd.singularValues()(0);
}

Matrix solve_sylvester(const Matrix& A, const Matrix& B, const Matrix& C) {
  require_square(A, "A");
  require_square(B, "B");
  const Eigen::Index n = A.rows(), m = B.rows();
  if (C.rows() != n || C.cols() != m) {
    throw Error(ErrorKind::DimensionMismatch, "Sylvester right-hand side has wrong shape");
  }
  if (n == 0 || m == 0) return Matrix::Zero(n, m);

  // Column-major vec: vec(A X) = (I_m (x) A) vec X, vec(X B) = (B^T (x) I_n) vec X.
  Matrix K = Matrix::Zero(n * m, n * m);
  for (Eigen::Index j = 0; j < m; ++j) {
    K.block(j * n, j * n, n, n) += A;
    for (Eigen::Index i = 0; i < m; ++i) {
      K.block(j * n, i * n, n, n).diagonal().array() += B(i, j);
    }
  }
  Eigen::FullPivLU<Matrix> lu(K);
  if (!lu.isInvertible()) {
    throw Error(ErrorKind::SingularPencil, "A and -B share an eigenvalue");
  }
  const Vector x = lu.solve(Eigen::Map<const Vector>(C.data(), n * m));
  Matrix X = Eigen::Map<const Matrix>(x.data(), n, m);

  const double residual = (A * X + X * B - C).norm();
  if (!X.allFinite() || residual > 1e-10 * (1.0 + C.norm()) * (1.0 + X.norm())) {
    throw Error(ErrorKind::SingularPencil, "Sylvester system is numerically singular");
  }
  return X;
}

Matrix solve_lyapunov(const Matrix& A, const Matrix& Q) {
  require_square(A, "A");
  if (Q.rows() != A.rows() || Q.cols() != A.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "Q must match A");
  }
  const HurwitzCheck h = is_hurwitz(A);
  if (!h.stable) {
    throw Error(ErrorKind::NotHurwitz,
                "Lyapunov solve needs Hurwitz A (abscissa " + std::to_string(h.abscissa) + ")");
  }
  return symmetrize(solve_sylvester(A.transpose(), A, -Q));
}

CareSolution solve_care(const Matrix& A, const Matrix& B, const Matrix& Q,
                        const CareOptions& options) {
  require_square(A, "A");
  const Eigen::Index n = A.rows();
  if (B.rows() != n || Q.rows() != n || Q.cols() != n) {
    throw Error(ErrorKind::DimensionMismatch, "CARE dimensions inconsistent");
  }
  if (!pbh_full_rank_on_unstable(A, B)) {
    throw Error(ErrorKind::NotStabilizable, "(A, B) has an uncontrollable unstable mode");
  }

  Matrix K = initial_stabilizing_gain(A, B);
  if (!is_hurwitz(A - B * K).stable) {
    throw Error(ErrorKind::NotStabilizable, "could not construct a stabilizing seed gain");
  }

  const double target = options.tolerance * (1.0 + norm2(Q));
  CareSolution sol;
  for (int it = 1; it <= options.max_iterations; ++it) {
    const Matrix closed = A - B * K;
    Matrix P;
    try {
      P = solve_lyapunov(closed, Q + K.transpose() * K);
    } catch (const Error& e) {
      throw Error(ErrorKind::NoConvergence,
                  std::string("Newton-Kleinman lost stability: ") + e.what());
    }
    sol.P = P;
    sol.iterations = it;
    sol.residual_norm = norm2(care_residual(A, B, Q, P));
    K = B.transpose() * P;
    if (sol.residual_norm <= target) break;
  }
  if (sol.residual_norm > target) {
    throw Error(ErrorKind::NoConvergence,
                "CARE residual " + format_double(sol.residual_norm) + " after " +
                    std::to_string(options.max_iterations) + " iterations");
  }
  if (!is_hurwitz(A - B * B.transpose() * sol.P).stable) {
    throw Error(ErrorKind::NoConvergence, "CARE solution is not stabilizing");
  }
  return sol;
}

CareSolution solve_filter_care(const Matrix& A_shifted, const Matrix& C, double beta) {
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be positive");
  const Eigen::Index n = A_shifted.rows();
  return solve_care(A_shifted.transpose(), std::sqrt(2.0 * beta) * C.transpose(),
                    Matrix::Identity(n, n));
}

RegulatorSolution solve_regulator(const Matrix& A, const Matrix& B, const Matrix& C,
                                  const Matrix& A12, const Matrix& A22, const Matrix& C2) {
  require_square(A, "A");
  require_square(A22, "A22");
  const Eigen::Index n = A.rows(), m = B.cols(), p = C.rows(), k = A22.rows();
  if (B.rows() != n || C.cols() != n || A12.rows() != n || A12.cols() != k ||
      C2.rows() != p || C2.cols() != k) {
    throw Error(ErrorKind::DimensionMismatch, "regulator equation dimensions inconsistent");
  }
  RegulatorSolution sol{Matrix::Zero(n, k), Matrix::Zero(m, k), 0.0};
  if (k == 0) return sol;

  // Unknown x = [vec Pi; vec Gamma].
  Matrix S = Matrix::Zero((n + p) * k, (n + m) * k);
  for (Eigen::Index j = 0; j < k; ++j) {
    for (Eigen::Index i = 0; i < k; ++i) {
      S.block(j * n, i * n, n, n).diagonal().array() += A22(i, j);  // A22^T (x) I
    }
    S.block(j * n, j * n, n, n) -= A;                      // -(I (x) A)
    S.block(j * n, n * k + j * m, n, m) = -B;              // -(I (x) B)
    S.block(n * k + j * p, j * n, p, n) = C;               // I (x) C
  }
  if (numerical_rank(S) < S.rows()) {
    throw Error(ErrorKind::RankDeficient,
                "regulator equations not solvable: invariant zero coincides with an "
                "exosystem eigenvalue");
  }
  Vector rhs((n + p) * k);
  rhs << Eigen::Map<const Vector>(A12.data(), n * k), Eigen::Map<const Vector>(C2.data(), p * k);
  const Vector x = Eigen::CompleteOrthogonalDecomposition<Matrix>(S).solve(rhs);
  sol.Pi = Eigen::Map<const Matrix>(x.data(), n, k);
  sol.Gamma = Eigen::Map<const Matrix>(x.data() + n * k, m, k);
  sol.residual = norm2(sol.Pi * A22 - A * sol.Pi - A12 - B * sol.Gamma) +
                 norm2(C * sol.Pi - C2);
  if (sol.residual > 1e-8 * (1.0 + norm2(A12) + norm2(C2))) {
    throw Error(ErrorKind::RankDeficient,
                "regulator residual " + std::to_string(sol.residual) + " too large");
  }
  return sol;
}

Matrix null_space_basis(const Matrix& M, double tol) {
  const Eigen::Index cols = M.cols();
  if (M.rows() == 0) return Matrix::Identity(cols, cols);
  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeFullV);
  const Vector& s = svd.singularValues();
  const double top = s.size() ? s(0) : 0.0;
  Eigen::Index rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * top) ++rank;
  }
  return svd.matrixV().rightCols(cols - rank);
}

int numerical_rank(const Matrix& M, double tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Matrix> svd(M);
  const Vector& s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) ++rank;
  }
  return rank;
}

int numerical_rank(const Eigen::MatrixXcd& M, double tol) {
  if (M.size() == 0) return 0;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
  const Vector& s = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > tol * s(0)) ++rank;
  }
  return rank;
}

Matrix observability_matrix(const Matrix& A, const Matrix& C, int order) {
  require_square(A, "A");
  if (C.cols() != A.rows()) throw Error(ErrorKind::DimensionMismatch, "C must have n columns");
  if (order < 1) throw Error(ErrorKind::InvalidArgument, "order must be >= 1");
  const Eigen::Index p = C.rows();
  Matrix O(order * p, A.cols());
  Matrix block = C;
  for (int k = 0; k < order; ++k) {
    O.middleRows(k * p, p) = block;
    block = block * A;
  }
  return O;
}

bool is_observable(const Matrix& A, const Matrix& C) {
  const int n = static_cast<int>(A.rows());
  if (n == 0) return true;
  return numerical_rank(observability_matrix(A, C, n)) == n;
}

bool is_controllable(const Matrix& A, const Matrix& B) {
  return is_observable(A.transpose(), B.transpose());
}

ComplexVector eigenvalues(const Matrix& A) {
  require_square(A, "A");
  if (A.rows() == 0) return ComplexVector(0);
  Eigen::EigenSolver<Matrix> es(A, /*computeEigenvectors=*/false);
  if (es.info() != Eigen::Success) {
    throw Error(ErrorKind::NoConvergence, "QR iteration did not converge");
  }
  return es.eigenvalues();
}

double spectral_abscissa(const Matrix& A) {
  if (A.rows() == 0) return -std::numeric_limits<double>::infinity();
  return eigenvalues(A).real().maxCoeff();
}

HurwitzCheck is_hurwitz(const Matrix& A, double margin) {
  HurwitzCheck out;
  out.abscissa = spectral_abscissa(A);
  out.stable = out.abscissa < -margin;
  return out;
}

Matrix stabilizing_output_injection(const Matrix& A, const Matrix& C) {
  require_square(A, "A");
  const Eigen::Index n = A.rows();
  if (C.cols() != n) throw Error(ErrorKind::DimensionMismatch, "C must have n columns");
  if (!pbh_full_rank_on_unstable(A.transpose(), C.transpose())) {
    throw Error(ErrorKind::NotDetectable, "(A, C) has an unobservable unstable mode");
  }
  const Matrix I = Matrix::Identity(n, n);
  Matrix K = -solve_care(A.transpose(), C.transpose(), I).P * C.transpose();
  if (spectral_abscissa(A + K * C) > -0.1) {
    // Shift so the closed loop clears the 0.1 design margin.
    if (!pbh_full_rank_on_unstable(A.transpose() + 0.1 * I, C.transpose())) {
      throw Error(ErrorKind::NotDetectable, "cannot reach stability margin 0.1");
    }
    K = -solve_care(A.transpose() + 0.1 * I, C.transpose(), I).P * C.transpose();
  }
  return K;
}

Matrix stabilizing_state_feedback(const Matrix& A, const Matrix& B) {
  require_square(A, "A");
  const Eigen::Index n = A.rows();
  if (B.rows() != n) throw Error(ErrorKind::DimensionMismatch, "B must have n rows");
  const Matrix I = Matrix::Identity(n, n);
  Matrix K = -B.transpose() * solve_care(A, B, I).P;
  if (spectral_abscissa(A + B * K) > -0.1) {
    if (!pbh_full_rank_on_unstable(A + 0.1 * I, B)) {
      throw Error(ErrorKind::NotStabilizable, "cannot reach stability margin 0.1");
    }
    K = -B.transpose() * solve_care(A + 0.1 * I, B, I).P;
  }
  return K;
}

Matrix matrix_exponential(const Matrix& A, double t) {
  require_square(A, "A");
  if (A.rows() == 0) return A;
  const Matrix At = A * t;
  if (!At.allFinite()) throw Error(ErrorKind::Overflow, "A t is not finite");
  Matrix E = At.exp();
  if (!E.allFinite()) throw Error(ErrorKind::Overflow, "matrix exponential overflowed");
  return E;
}

}  // namespace delaysync
