#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "delaysync/ddesim.hpp"
#include "delaysync/error.hpp"
#include "test_support.hpp"

using namespace delaysync;
using namespace testing_support;

namespace {

const Matrix kDoubleA = mat({{0, 1}, {0, 0}});
const Matrix kDoubleB = mat({{0}, {1}});

SpanningTreeNetwork chain(const std::vector<double>& weights, double beta,
                          std::optional<double> alpha = {}) {
  const int n = static_cast<int>(weights.size()) + 1;
  Matrix W = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) W(i, i - 1) = weights[i - 1];
  return validate_spanning_tree(build_laplacian(WeightedDigraph(W)), beta, alpha);
}

DelayAssignment chain_delays(const SpanningTreeNetwork& tree, const std::vector<double>& taus) {
  std::map<EdgeKey, double> edges;
  for (int i = 1; i < tree.size(); ++i) edges[{i, tree.parent(i)}] = taus[i - 1];
  return cumulative_root_delays(tree, edges);
}

/// Delay-free network as one dense linear system on the stacked agent states.
Matrix stacked_matrix(const SpanningTreeNetwork& tree, const std::vector<AgentDynamics>& dyn) {
  std::vector<int> offset{0};
  for (const auto& d : dyn) offset.push_back(offset.back() + d.dim());
  Matrix S = Matrix::Zero(offset.back(), offset.back());
  for (int i = 0; i < tree.size(); ++i) {
    const auto& d = dyn[i];
    S.block(offset[i], offset[i], d.dim(), d.dim()) = d.M;
    if (i == 0) continue;
    const int p = tree.parent(i);
    const double a = tree.parent_weight(i);
    S.block(offset[i], offset[i], d.dim(), d.dim()) += a * d.W * d.E;
    S.block(offset[i], offset[p], d.dim(), dyn[p].dim()) -= a * d.W * dyn[p].E;
  }
  return S;
}

Vector stacked_state(const Trajectory& traj, int k) {
  int total = 0;
  for (int a = 0; a < traj.agents(); ++a) total += traj.dim(a);
  Vector z(total);
  int off = 0;
  for (int a = 0; a < traj.agents(); ++a) {
    z.segment(off, traj.dim(a)) = traj.state(a, k);
    off += traj.dim(a);
  }
  return z;
}

AgentDynamics free_oscillator() {
  AgentDynamics d;
  d.M = mat({{0, 1}, {-1, 0}});
  d.W = Matrix::Zero(2, 2);
  d.E = Matrix::Identity(2, 2);
  d.Y = Matrix::Identity(2, 2);
  d.Uz = Matrix::Zero(1, 2);
  d.Ud = Matrix::Zero(1, 2);
  d.plant_dim = 2;
  return d;
}

}  // namespace

TEST_CASE("root follows its own open loop exactly") {
  const auto tree = chain({1.0}, 1.0);
  const auto delays = chain_delays(tree, {0.4});
  const auto proto = design_static_full_state(kDoubleA, kDoubleB, 1.0, Matrix::Identity(2, 2));
  SimConfig cfg;
  cfg.step = 0.01;
  cfg.horizon = 5.0;
  const Vector x0 = vec({1.0, -0.5});
  const auto traj = simulate_homogeneous_static(tree, delays, {kDoubleA, kDoubleB,
                                                               Matrix::Identity(2, 2)},
                                                proto, {x0, vec({0, 0})}, cfg);
  for (int k = traj.zero_index(); k < traj.samples(); k += 50) {
    const Vector want = matrix_exponential(kDoubleA, traj.times()[k]) * x0;
    CHECK((traj.plant_state(0, k) - want).norm() <= 1e-10);
  }
}

TEST_CASE("zero delays reproduce the dense delay-free system") {
  SimConfig cfg;
  cfg.step = 0.005;
  cfg.horizon = 4.0;

  SUBCASE("static protocol") {
    const auto tree = chain({1.0, 1.5}, 1.0);
    const auto delays = chain_delays(tree, {0.0, 0.0});
    const AgentModel agent{kDoubleA, kDoubleB, Matrix::Identity(2, 2)};
    const auto proto = design_static_full_state(kDoubleA, kDoubleB, 1.0, Matrix::Identity(2, 2));
    const std::vector<Vector> x0{vec({1, 0}), vec({-1, 2}), vec({0.5, -1})};
    const auto traj = simulate_homogeneous_static(tree, delays, agent, proto, x0, cfg);
    // Independent assembly: x' = (I kron A + L kron B F) x.
    const Matrix L = tree.laplacian();
    Matrix S = Matrix::Zero(6, 6);
    for (int i = 0; i < 3; ++i) {
      S.block(2 * i, 2 * i, 2, 2) += kDoubleA;
      for (int j = 0; j < 3; ++j) S.block(2 * i, 2 * j, 2, 2) += L(i, j) * kDoubleB * proto.F;
    }
    Vector z0(6);
    z0 << x0[0], x0[1], x0[2];
    const int last = traj.samples() - 1;
    const Vector want = matrix_exponential(S, traj.times()[last]) * z0;
    CHECK((stacked_state(traj, last) - want).norm() <= 1e-8 * (1.0 + want.norm()));
  }

  SUBCASE("dynamic protocol") {
    const auto tree = chain({1.0, 2.0}, 1.0, 3.0);
    const auto delays = chain_delays(tree, {0.0, 0.0});
    const Matrix C = mat({{1, 0}});
    const auto proto = design_dynamic_partial_state(kDoubleA, kDoubleB, C, 1.0, 3.0);
    const std::vector<Vector> x0{vec({1, 0}), vec({-1, 2}), vec({0.5, -1})};
    const auto traj =
        simulate_homogeneous_dynamic(tree, delays, {kDoubleA, kDoubleB, C}, proto, x0, {}, cfg);
    // Per agent (x, chi): x' = A x + B (Cc chi + Dc zeta), chi' = Ac chi + Bc zeta,
    // zeta_i = sum_j l_ij C x_j.
    const Matrix L = tree.laplacian();
    const int n = 2, nc = static_cast<int>(proto.Ac.rows()), d = n + nc;
    Matrix S = Matrix::Zero(3 * d, 3 * d);
    for (int i = 0; i < 3; ++i) {
      S.block(i * d, i * d, n, n) += kDoubleA;
      S.block(i * d, i * d + n, n, nc) += kDoubleB * proto.Cc;
      S.block(i * d + n, i * d + n, nc, nc) += proto.Ac;
      for (int j = 0; j < 3; ++j) {
        S.block(i * d, j * d, n, n) += L(i, j) * kDoubleB * proto.Dc * C;
        S.block(i * d + n, j * d, nc, n) += L(i, j) * proto.Bc * C;
      }
    }
    Vector z0 = Vector::Zero(3 * d);
    for (int i = 0; i < 3; ++i) z0.segment(i * d, n) = x0[i];
    const int last = traj.samples() - 1;
    const Vector want = matrix_exponential(S, traj.times()[last]) * z0;
    CHECK((stacked_state(traj, last) - want).norm() <= 1e-8 * (1.0 + want.norm()));
  }

  SUBCASE("heterogeneous regulator") {
    const auto tree = chain({1.0, 1.0}, 1.0);
    const auto delays = chain_delays(tree, {0.0, 0.0});
    const std::vector<AgentModel> agents{{mat({{0}}), mat({{1}}), mat({{1}})},
                                         {mat({{-1}}), mat({{1}}), mat({{1}})},
                                         {kDoubleA, kDoubleB, mat({{1, 0}})}};
    const auto design = design_heterogeneous(agents, tree);
    SimConfig fine = cfg;
    fine.step = 0.002;
    const auto traj =
        simulate_heterogeneous(tree, delays, agents, design, {vec({1}), vec({0}), vec({0, 0})},
                               fine);
    std::vector<AgentDynamics> dyn{hetero_root_loop(agents[0], design.p)};
    for (int i = 1; i < 3; ++i)
      dyn.push_back(hetero_follower_loop(agents[i], design.controller_for(i), design.observer));
    const int last = traj.samples() - 1;
    const Vector want =
        matrix_exponential(stacked_matrix(tree, dyn), traj.times()[last]) * stacked_state(traj, 0);
    CHECK((stacked_state(traj, last) - want).norm() <= 1e-7 * (1.0 + want.norm()));

    // The transformed frame is the delay-free network by construction.
    const auto shifted = simulate_heterogeneous(tree, delays, agents, design,
                                                {vec({1}), vec({0}), vec({0, 0})}, fine,
                                                HeteroFrame::Transformed);
    CHECK((stacked_state(shifted, last) - stacked_state(traj, last)).norm() == 0.0);
  }
}

TEST_CASE("coupling signal reads the parent's delayed history") {
  const auto tree = chain({2.0}, 1.0);
  const auto delays = chain_delays(tree, {0.5});
  const auto proto = design_static_full_state(kDoubleA, kDoubleB, 1.0, Matrix::Identity(2, 2));
  SimConfig cfg;
  cfg.step = 0.01;
  cfg.horizon = 1.0;
  cfg.history = {ramp_history(vec({1, 0}), vec({2, 0})), constant_history(vec({3, 0}))};
  const auto traj = simulate_homogeneous_static(
      tree, delays, {kDoubleA, kDoubleB, Matrix::Identity(2, 2)}, proto,
      {vec({1, 0}), vec({3, 0})}, cfg);
  // Parent at t - tau = -0.5 sits on the ramp: 1 + 2 * (-0.5) = 0.
  const Vector zeta = coupling_signal(traj, tree, delays, 0.0, 1);
  CHECK(zeta(0) == doctest::Approx(2.0 * (3.0 - 0.0)).epsilon(1e-12));
  CHECK(std::abs(zeta(1)) <= 1e-12);
  // Hermite interpolation is exact on the linear history between grid points.
  CHECK(traj.state_at(0, -0.333)(0) == doctest::Approx(1.0 - 0.666).epsilon(1e-12));
  CHECK(coupling_signal(traj, tree, delays, 0.3, 0).isZero(0.0));
}

TEST_CASE("shifting by root delays advances each agent") {
  const auto tree = chain({1.0, 1.0}, 1.0);
  const auto delays = chain_delays(tree, {0.5, 0.25});
  SimConfig cfg;
  cfg.step = 0.01;
  cfg.horizon = 6.0;
  const HistoryFunction wave = [](double t) { return vec({std::sin(t), std::cos(t)}); };
  cfg.history = {wave, wave, wave};
  const std::vector<AgentDynamics> dyn(3, free_oscillator());
  const auto traj = simulate_network(tree, delays, dyn, {wave(0), wave(0), wave(0)}, cfg);
  const auto shifted = shift_by_root_delays(traj, delays);
  CHECK(shifted.start_time() == 0.0);
  CHECK(shifted.end_time() == doctest::Approx(6.0 - 0.75));
  for (int k = 0; k < shifted.samples(); k += 37) {
    const double t = shifted.times()[k];
    CHECK(std::abs(shifted.state(0, k)(0) - std::sin(t)) <= 1e-8);
    CHECK(std::abs(shifted.state(1, k)(0) - std::sin(t + 0.5)) <= 1e-8);
    CHECK(std::abs(shifted.state(2, k)(0) - std::sin(t + 0.75)) <= 1e-8);
  }
  auto short_delays = delays;
  short_delays.root_delays(2) = 10.0;
  CHECK(kind_of([&] { shift_by_root_delays(traj, short_delays); }) == ErrorKind::HorizonTooShort);
}

TEST_CASE("root trajectory does not depend on the followers") {
  const auto tree = chain({1.0, 1.5}, 1.0);
  const auto delays = chain_delays(tree, {0.3, 1.1});
  const AgentModel agent{kDoubleA, kDoubleB, Matrix::Identity(2, 2)};
  const auto proto = design_static_full_state(kDoubleA, kDoubleB, 1.0, Matrix::Identity(2, 2));
  SimConfig cfg;
  cfg.step = 0.01;
  cfg.horizon = 8.0;
  const auto a = simulate_homogeneous_static(tree, delays, agent, proto,
                                             {vec({1, 0}), vec({0, 0}), vec({0, 0})}, cfg);
  const auto b = simulate_homogeneous_static(tree, delays, agent, proto,
                                             {vec({1, 0}), vec({5, -3}), vec({-2, 7})}, cfg);
  bool same = true;
  for (int k = 0; k < a.samples(); ++k) same = same && a.state(0, k) == b.state(0, k);
  CHECK(same);
  CHECK_FALSE(a.state(2, a.samples() - 1) == b.state(2, b.samples() - 1));
}

TEST_CASE("fourth-order convergence in the step") {
  const auto tree = chain({1.0, 1.5}, 1.0);
  const auto delays = chain_delays(tree, {0.4, 0.8});
  const AgentModel agent{kDoubleA, kDoubleB, Matrix::Identity(2, 2)};
  const auto proto = design_static_full_state(kDoubleA, kDoubleB, 1.0, Matrix::Identity(2, 2));
  const std::vector<Vector> x0{vec({1, 0}), vec({-1, 1}), vec({2, 0})};
  auto final_state = [&](double h) {
    SimConfig cfg;
    cfg.step = h;
    cfg.horizon = 4.0;
    const auto t = simulate_homogeneous_static(tree, delays, agent, proto, x0, cfg);
    return Vector(t.state(2, t.samples() - 1));
  };
  const Vector ref = final_state(0.1 / 32);
  const double e1 = (final_state(0.1) - ref).norm();
  const double e2 = (final_state(0.05) - ref).norm();
  CHECK(e1 / e2 >= 12.0);
  CHECK(e1 / e2 <= 20.0);
}

TEST_CASE("integrator guards") {
  const auto tree = chain({1.0}, 1.0);
  const auto delays = chain_delays(tree, {0.2});
  const AgentModel agent{kDoubleA, kDoubleB, Matrix::Identity(2, 2)};
  const auto proto = design_static_full_state(kDoubleA, kDoubleB, 1.0, Matrix::Identity(2, 2));
  SimConfig cfg;
  cfg.horizon = 2.0;

  SUBCASE("step above a quarter of the smallest delay") {
    cfg.step = 0.06;
    CHECK(kind_of([&] {
            simulate_homogeneous_static(tree, delays, agent, proto, {vec({1, 0}), vec({0, 0})},
                                        cfg);
          }) == ErrorKind::StepTooLarge);
  }
  SUBCASE("step outside the local stability region") {
    AgentDynamics stiff = free_oscillator();
    stiff.M = mat({{-1000, 0}, {0, -1}});
    cfg.step = 0.01;
    CHECK(kind_of([&] {
            simulate_network(tree, delays, {stiff, stiff}, {vec({1, 0}), vec({0, 0})}, cfg);
          }) == ErrorKind::StepTooLarge);
  }
  SUBCASE("blow-up") {
    AgentDynamics grow = free_oscillator();
    grow.M = mat({{5, 0}, {0, 5}});
    cfg.step = 0.01;
    cfg.horizon = 10.0;
    CHECK(kind_of([&] {
            simulate_network(tree, delays, {grow, grow}, {vec({1, 0}), vec({0, 0})}, cfg);
          }) == ErrorKind::NonFinite);
  }
  SUBCASE("lookups outside the stored window") {
    cfg.step = 0.01;
    const auto traj = simulate_homogeneous_static(tree, delays, agent, proto,
                                                  {vec({1, 0}), vec({0, 0})}, cfg);
    CHECK(kind_of([&] { traj.state_at(0, -0.5); }) == ErrorKind::HistoryUnderrun);
    CHECK(kind_of([&] { traj.state_at(0, 2.5); }) == ErrorKind::HorizonTooShort);
    CHECK_NOTHROW(traj.state_at(0, -0.2));
    CHECK_NOTHROW(traj.state_at(0, 2.0));
  }
  SUBCASE("initial state of the wrong size") {
    cfg.step = 0.01;
    CHECK(kind_of([&] {
            simulate_homogeneous_static(tree, delays, agent, proto, {vec({1}), vec({0, 0})}, cfg);
          }) == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("subsampling keeps the grid aligned at zero") {
  const auto tree = chain({1.0}, 1.0);
  const auto delays = chain_delays(tree, {0.2});
  const auto proto = design_static_full_state(kDoubleA, kDoubleB, 1.0, Matrix::Identity(2, 2));
  SimConfig cfg;
  cfg.step = 0.01;
  cfg.horizon = 1.0;
  const auto full = simulate_homogeneous_static(
      tree, delays, {kDoubleA, kDoubleB, Matrix::Identity(2, 2)}, proto,
      {vec({1, 0}), vec({0, 0})}, cfg);
  cfg.stride = 5;
  const auto thin = simulate_homogeneous_static(
      tree, delays, {kDoubleA, kDoubleB, Matrix::Identity(2, 2)}, proto,
      {vec({1, 0}), vec({0, 0})}, cfg);
  CHECK(thin.times()[thin.zero_index()] == 0.0);
  CHECK(thin.dt() == doctest::Approx(0.05));
  for (int k = 0; k < thin.samples(); ++k) {
    CHECK(thin.state(1, k) == full.state(1, 5 * k));
  }
}

TEST_CASE("trajectory CSV layout") {
  const auto tree = chain({1.0}, 1.0);
  const auto delays = chain_delays(tree, {0.2});
  const auto proto = design_static_full_state(kDoubleA, kDoubleB, 1.0, Matrix::Identity(2, 2));
  SimConfig cfg;
  cfg.step = 0.05;
  cfg.horizon = 0.5;
  const auto traj = simulate_homogeneous_static(
      tree, delays, {kDoubleA, kDoubleB, Matrix::Identity(2, 2)}, proto,
      {vec({1, 0}), vec({0, 0})}, cfg);
  const auto path = std::filesystem::temp_directory_path() / "delaysync_test_state.csv";
  write_trajectory_csv(traj, path, "state");
  std::ifstream in(path);
  std::string header, first;
  std::getline(in, header);
  std::getline(in, first);
  CHECK(header == "t,agent,state_index,value");
  CHECK(first.rfind("-0.2", 0) == 0);
  int rows = 0;
  for (std::string line; std::getline(in, line);) ++rows;
  CHECK(rows + 1 == traj.samples() * 2 * 2);
  std::filesystem::remove(path);
  CHECK(kind_of([&] { write_trajectory_csv(traj, path, "bogus"); }) == ErrorKind::InvalidArgument);
}
