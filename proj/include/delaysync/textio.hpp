#pragma once

#include <string>

#include <Eigen/Dense>

namespace delaysync {

/// Shortest-safe round-trip decimal text (17 significant digits).
std::string format_double(double value);

/// Bracketed row-list literal, e.g. [[1, 0], [0, 1]].
std::string format_matrix(const Eigen::MatrixXd& M);

/// Bracketed list literal, e.g. [1, 2, 3].
std::string format_vector(const Eigen::VectorXd& v);

}  // namespace delaysync
