#include "delaysync/netgraph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "delaysync/error.hpp"

namespace delaysync {

namespace {

std::string agent_label(int i) { return "agent " + std::to_string(i + 1); }

}  // namespace

WeightedDigraph::WeightedDigraph(Matrix weights) : weights_(std::move(weights)) {
  if (weights_.rows() == 0 || weights_.rows() != weights_.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "weight matrix must be square and non-empty");
  }
  for (Eigen::Index i = 0; i < weights_.rows(); ++i) {
    for (Eigen::Index j = 0; j < weights_.cols(); ++j) {
      const double a = weights_(i, j);
      if (!std::isfinite(a) || a < 0.0) {
        throw Error(ErrorKind::InvalidArgument, "weights must be finite and nonnegative");
      }
      if (i == j && a != 0.0) {
        throw Error(ErrorKind::InvalidArgument, "self-loop weight on " + agent_label(int(i)));
      }
    }
  }
}

Matrix build_laplacian(const WeightedDigraph& graph) {
  Matrix L = -graph.weights();
  for (int i = 0; i < graph.size(); ++i) {
    L(i, i) = graph.weights().row(i).sum();
  }
  return L;
}

double SpanningTreeNetwork::parent_weight(int i) const {
  return parent_[i] < 0 ? 0.0 : graph_.weight(i, parent_[i]);
}

Matrix SpanningTreeNetwork::ordered_laplacian() const {
  const int n = size();
  Matrix out(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) out(r, c) = laplacian_(ordering_[r], ordering_[c]);
  }
  return out;
}

std::vector<int> SpanningTreeNetwork::children_in_order() const {
  return {ordering_.begin() + 1, ordering_.end()};
}

SpanningTreeNetwork validate_spanning_tree(const Matrix& laplacian, double beta,
                                           std::optional<double> alpha) {
  if (laplacian.rows() == 0 || laplacian.rows() != laplacian.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "Laplacian must be square and non-empty");
  }
  if (!(beta > 0.0)) throw Error(ErrorKind::InvalidArgument, "beta must be positive");
  if (alpha && !(*alpha > beta)) {
    throw Error(ErrorKind::InvalidArgument, "alpha must exceed beta");
  }
  const int n = static_cast<int>(laplacian.rows());
  const double scale = 1.0 + laplacian.cwiseAbs().maxCoeff();

  std::vector<int> parent(n, -1);
  for (int i = 0; i < n; ++i) {
    if (std::abs(laplacian.row(i).sum()) > 1e-12 * scale) {
      throw Error(ErrorKind::InvalidArgument, "Laplacian row sum nonzero for " + agent_label(i));
    }
    int indegree = 0;
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (laplacian(i, j) > 0.0) {
        throw Error(ErrorKind::InvalidArgument, "positive off-diagonal Laplacian entry");
      }
      if (laplacian(i, j) < 0.0) {
        ++indegree;
        parent[i] = j;
      }
    }
    if (i == 0 && indegree != 0) {
      throw Error(ErrorKind::NotATree, "agent 1 must be the root (no incoming edges)");
    }
    if (i != 0 && indegree != 1) {
      throw Error(ErrorKind::NotATree, agent_label(i) + " has indegree " +
                                           std::to_string(indegree) + ", expected 1");
    }
  }

  // Peel nodes whose parent is already placed; smallest index first.
  std::vector<int> ordering{0};
  std::vector<bool> placed(n, false);
  placed[0] = true;
  while (static_cast<int>(ordering.size()) < n) {
    int next = -1;
    for (int i = 1; i < n; ++i) {
      if (!placed[i] && placed[parent[i]]) {
        next = i;
        break;
      }
    }
    if (next < 0) {
      throw Error(ErrorKind::NotATree, "cycle detected: some agents are unreachable from the root");
    }
    placed[next] = true;
    ordering.push_back(next);
  }

  for (int i = 1; i < n; ++i) {
    const double lii = laplacian(i, i);
    if (lii < beta) {
      throw Error(ErrorKind::BoundViolation, "l_" + std::to_string(i + 1) + std::to_string(i + 1) +
                                                 " = " + std::to_string(lii) + " < beta = " +
                                                 std::to_string(beta));
    }
    if (alpha && lii > *alpha) {
      throw Error(ErrorKind::BoundViolation, "l_" + std::to_string(i + 1) + std::to_string(i + 1) +
                                                 " = " + std::to_string(lii) + " > alpha = " +
                                                 std::to_string(*alpha));
    }
  }

  Matrix weights = -laplacian;
  weights.diagonal().setZero();

  SpanningTreeNetwork tree;
  tree.graph_ = WeightedDigraph(weights);
  tree.laplacian_ = laplacian;
  tree.ordering_ = std::move(ordering);
  tree.parent_ = std::move(parent);
  tree.beta_ = beta;
  tree.alpha_ = alpha;
  return tree;
}

double DelayAssignment::max_root_delay() const {
  return root_delays.size() == 0 ? 0.0 : root_delays.maxCoeff();
}

double DelayAssignment::min_positive_delay() const {
  double best = 0.0;
  for (const auto& [edge, tau] : edge_delays) {
    if (tau > 0.0 && (best == 0.0 || tau < best)) best = tau;
  }
  return best;
}

double DelayAssignment::edge_delay(int child, int parent) const {
  if (parent < 0) return 0.0;
  auto it = edge_delays.find({child, parent});
  if (it == edge_delays.end()) {
    throw Error(ErrorKind::MissingDelay, "no delay for edge " + agent_label(parent) + " -> " +
                                             agent_label(child));
  }
  return it->second;
}

DelayAssignment cumulative_root_delays(const SpanningTreeNetwork& tree,
                                       const std::map<EdgeKey, double>& edge_delays) {
  DelayAssignment out;
  const int n = tree.size();
  for (const auto& [edge, tau] : edge_delays) {
    const auto [child, parent] = edge;
    if (child < 0 || child >= n || parent < 0 || parent >= n || tree.parent(child) != parent) {
      throw Error(ErrorKind::InvalidArgument, "delay given for " + agent_label(parent) + " -> " +
                                                  agent_label(child) + ", which is not a tree edge");
    }
    if (!std::isfinite(tau) || tau < 0.0) {
      throw Error(ErrorKind::InvalidArgument, "delays must be finite and nonnegative");
    }
  }
  out.root_delays = Vector::Zero(n);
  for (int i : tree.children_in_order()) {
    const int p = tree.parent(i);
    auto it = edge_delays.find({i, p});
    if (it == edge_delays.end()) {
      throw Error(ErrorKind::MissingDelay,
                  "no delay for edge " + agent_label(p) + " -> " + agent_label(i));
    }
    out.edge_delays.emplace(EdgeKey{i, p}, it->second);
    out.root_delays(i) = out.root_delays(p) + it->second;
  }
  return out;
}

Matrix reduced_laplacian(const SpanningTreeNetwork& tree) {
  const int n = tree.size();
  return tree.ordered_laplacian().bottomRightCorner(n - 1, n - 1);
}

}  // namespace delaysync
