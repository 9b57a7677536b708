#pragma once

#include <complex>

#include <Eigen/Dense>

namespace delaysync {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;

/// Induced 2-norm (largest singular value).
double norm2(const Eigen::Ref<const Matrix>& M);

/// Solves A X + X B = C by vectorizing into (I (x) A + B^T (x) I) vec X = vec C.
/// Intended for desk-scale problems (n*m up to a few hundred unknowns).
/// Throws SingularPencil when the spectra of A and -B intersect numerically.
Matrix solve_sylvester(const Matrix& A, const Matrix& B, const Matrix& C);

/// Solves A^T X + X A = -Q for Hurwitz A. Throws NotHurwitz.
Matrix solve_lyapunov(const Matrix& A, const Matrix& Q);

struct CareSolution {
  Matrix P;
  double residual_norm = 0.0;
  int iterations = 0;
};

struct CareOptions {
  double tolerance = 1e-9;  // relative to 1 + ||Q||
  int max_iterations = 100;
};

/// Stabilizing solution of A^T P + P A - P B B^T P + Q = 0.
///
/// Newton-Kleinman iteration. The initial stabilizing gain comes from the
/// Bass construction on A + cI with c above the spectral abscissa of A, using
/// a pseudo-inverse so that stabilizable but uncontrollable pairs still get a
/// seed. Every Newton step is one Lyapunov solve.
CareSolution solve_care(const Matrix& A, const Matrix& B, const Matrix& Q,
                        const CareOptions& options = {});

/// Solves A Q + Q A^T - 2 beta Q C^T C Q + I = 0 (observer/filter form) by
/// transposing into solve_care(A^T, sqrt(2 beta) C^T, I).
CareSolution solve_filter_care(const Matrix& A_shifted, const Matrix& C, double beta);

struct RegulatorSolution {
  Matrix Pi;
  Matrix Gamma;
  double residual = 0.0;
};

/// Regulator equations Pi A22 = A Pi + A12 + B Gamma, C Pi = C2. The stacked
/// Kronecker system must have full row rank (equivalently the Rosenbrock
/// matrix has rank n + p at every eigenvalue of A22), otherwise RankDeficient.
/// Among multiple solutions the minimum-norm one is returned.
RegulatorSolution solve_regulator(const Matrix& A, const Matrix& B, const Matrix& C,
                                  const Matrix& A12, const Matrix& A22, const Matrix& C2);

/// Orthonormal basis of null(M); singular values below tol * sigma_max count
/// as zero.
Matrix null_space_basis(const Matrix& M, double tol = 1e-8);

/// Numerical rank with the same relative threshold as null_space_basis.
int numerical_rank(const Matrix& M, double tol = 1e-8);
int numerical_rank(const Eigen::MatrixXcd& M, double tol = 1e-8);

/// [C; C A; ...; C A^(order-1)].
Matrix observability_matrix(const Matrix& A, const Matrix& C, int order);

bool is_observable(const Matrix& A, const Matrix& C);
bool is_controllable(const Matrix& A, const Matrix& B);

/// Eigenvalues via Hessenberg reduction and Francis double-shift QR.
ComplexVector eigenvalues(const Matrix& A);

struct HurwitzCheck {
  bool stable = false;
  double abscissa = 0.0;  // max real part of the spectrum
};

/// stable iff every eigenvalue has real part < -margin.
HurwitzCheck is_hurwitz(const Matrix& A, double margin = 1e-9);

double spectral_abscissa(const Matrix& A);

/// K such that A + K C is Hurwitz with abscissa <= -0.1 (dual Riccati design).
/// Throws NotDetectable.
Matrix stabilizing_output_injection(const Matrix& A, const Matrix& C);

/// K such that A + B K is Hurwitz with abscissa <= -0.1 (Riccati design with
/// Q = I). Throws NotStabilizable.
Matrix stabilizing_state_feedback(const Matrix& A, const Matrix& B);

/// e^{A t} by scaling and squaring with a degree-13 Pade approximant.
/// Throws Overflow when the result is not representable.
Matrix matrix_exponential(const Matrix& A, double t);

}  // namespace delaysync
