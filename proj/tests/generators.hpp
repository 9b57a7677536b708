#pragma once

// Hand-rolled random generators shared by the unit tests and the acceptance run.

#include <random>

#include "delaysync/matops.hpp"

namespace testing_support {

using delaysync::Matrix;
using delaysync::Vector;

inline Matrix random_matrix(int rows, int cols, std::mt19937& rng, double scale = 1.0) {
  std::normal_distribution<double> g(0.0, scale);
  Matrix M(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) M(r, c) = g(rng);
  return M;
}

inline Matrix random_spd(int n, std::mt19937& rng) {
  const Matrix G = random_matrix(n, n, rng);
  return G * G.transpose() + 0.1 * Matrix::Identity(n, n);
}

/// Real block-diagonal matrix whose eigenvalues are drawn from the closed left
/// half plane (including some on the imaginary axis), conjugated by a random
/// well-conditioned similarity.
inline Matrix random_marginal_matrix(int n, std::mt19937& rng) {
  std::uniform_real_distribution<double> re(-2.0, 0.0), im(0.2, 2.0), coin(0.0, 1.0);
  Matrix D = Matrix::Zero(n, n);
  int k = 0;
  while (k < n) {
    const bool on_axis = coin(rng) < 0.4;
    const double a = on_axis ? 0.0 : re(rng);
    if (k + 1 < n && coin(rng) < 0.5) {
      const double b = im(rng);
      D(k, k) = a;
      D(k + 1, k + 1) = a;
      D(k, k + 1) = b;
      D(k + 1, k) = -b;
      k += 2;
    } else {
      D(k, k) = a;
      ++k;
    }
  }
  Matrix S = Matrix::Identity(n, n) + 0.3 * random_matrix(n, n, rng);
  while (S.jacobiSvd().singularValues().minCoeff() < 0.3) {
    S = Matrix::Identity(n, n) + 0.3 * random_matrix(n, n, rng);
  }
  return S * D * S.inverse();
}

}  // namespace testing_support
