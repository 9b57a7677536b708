#pragma once

#include <map>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace delaysync {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Agent indices are zero-based throughout the C++ API. Agent 0 is the root
// ("agent 1" in user-facing files, which are one-based).

/// Weighted digraph with weights(i, j) = a_ij > 0 iff agent i receives
/// information from agent j.
class WeightedDigraph {
 public:
  explicit WeightedDigraph(Matrix weights);

  int size() const { return static_cast<int>(weights_.rows()); }
  const Matrix& weights() const { return weights_; }
  double weight(int i, int j) const { return weights_(i, j); }
  bool has_edge(int from, int to) const { return weights_(to, from) > 0.0; }

 private:
  Matrix weights_;
};

/// l_ii = sum_k a_ik, l_ij = -a_ij.
Matrix build_laplacian(const WeightedDigraph& graph);

/// A directed spanning tree rooted at agent 0 with validated Laplacian bounds.
///
/// `ordering` lists agents so that the permuted Laplacian P L P^T is lower
/// triangular; ordering[0] is always the root. Indices stored in `parent`
/// refer to the original (user) numbering.
class SpanningTreeNetwork {
 public:
  int size() const { return static_cast<int>(laplacian_.rows()); }

  const WeightedDigraph& graph() const { return graph_; }
  const Matrix& laplacian() const { return laplacian_; }
  const std::vector<int>& ordering() const { return ordering_; }
  double beta() const { return beta_; }
  std::optional<double> alpha() const { return alpha_; }

  /// Parent of agent i, or -1 for the root.
  int parent(int i) const { return parent_[i]; }
  /// a_{i,parent(i)}; zero for the root.
  double parent_weight(int i) const;
  /// l_ii.
  double diagonal(int i) const { return laplacian_(i, i); }

  /// Laplacian permuted by `ordering` (lower triangular).
  Matrix ordered_laplacian() const;

  /// Non-root agents in topological order (parents before children).
  std::vector<int> children_in_order() const;

 private:
  friend SpanningTreeNetwork validate_spanning_tree(const Matrix&, double,
                                                    std::optional<double>);
  SpanningTreeNetwork() : graph_(Matrix::Zero(1, 1)) {}

  WeightedDigraph graph_;
  Matrix laplacian_;
  std::vector<int> ordering_;
  std::vector<int> parent_;
  double beta_ = 0.0;
  std::optional<double> alpha_;
};

/// Checks that L is the Laplacian of a directed spanning tree rooted at agent
/// 0 and that beta <= l_ii (<= alpha) for every non-root agent. Throws
/// NotATree or BoundViolation.
SpanningTreeNetwork validate_spanning_tree(const Matrix& laplacian, double beta,
                                           std::optional<double> alpha = {});

/// Edge key: (child, parent).
using EdgeKey = std::pair<int, int>;

struct DelayAssignment {
  std::map<EdgeKey, double> edge_delays;
  /// Cumulative delay along the path from each agent up to the root.
  Vector root_delays;

  double max_root_delay() const;
  /// Smallest strictly positive edge delay, or 0 when all delays vanish.
  double min_positive_delay() const;
  /// Delay tau_{i,parent(i)}; 0 for the root.
  double edge_delay(int child, int parent) const;
};

DelayAssignment cumulative_root_delays(const SpanningTreeNetwork& tree,
                                       const std::map<EdgeKey, double>& edge_delays);

/// Laplacian with the root row and column removed, in tree ordering.
Matrix reduced_laplacian(const SpanningTreeNetwork& tree);

}  // namespace delaysync
