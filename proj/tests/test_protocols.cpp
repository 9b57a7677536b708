#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "delaysync/error.hpp"
#include "delaysync/netgraph.hpp"
#include "delaysync/protocols.hpp"
#include "test_support.hpp"

using namespace delaysync;
using namespace testing_support;

namespace {

const Matrix kDoubleA = mat({{0, 1}, {0, 0}});
const Matrix kDoubleB = mat({{0}, {1}});

AgentModel integrator() { return {mat({{0}}), mat({{1}}), mat({{1}})}; }
AgentModel stable_scalar() { return {mat({{-1}}), mat({{1}}), mat({{1}})}; }
AgentModel double_integrator() { return {kDoubleA, kDoubleB, mat({{1, 0}})}; }

SpanningTreeNetwork chain(const std::vector<double>& weights, double beta,
                          std::optional<double> alpha = {}) {
  const int n = static_cast<int>(weights.size()) + 1;
  Matrix W = Matrix::Zero(n, n);
  for (int i = 1; i < n; ++i) W(i, i - 1) = weights[i - 1];
  return validate_spanning_tree(build_laplacian(WeightedDigraph(W)), beta, alpha);
}

}  // namespace

TEST_CASE("static design examples") {
  SUBCASE("scalar integrator") {
    const auto s = design_static_full_state(mat({{0}}), mat({{1}}), 1.0, mat({{1}}));
    CHECK(s.P(0, 0) == doctest::Approx(1.0));
    CHECK(s.rho == 0.5);
    CHECK(s.F(0, 0) == doctest::Approx(-0.5));
  }
  SUBCASE("double integrator") {
    const auto s = design_static_full_state(kDoubleA, kDoubleB, 1.0, Matrix::Identity(2, 2));
    CHECK((s.F - mat({{-0.5, -0.5 * std::sqrt(3.0)}})).norm() <= 1e-8);
  }
  SUBCASE("unstable open loop") {
    CHECK(kind_of([] { design_static_full_state(mat({{1}}), mat({{1}}), 1.0, mat({{1}})); }) ==
          ErrorKind::AssumptionViolation);
  }
  SUBCASE("rho below 1/(2 beta)") {
    CHECK(kind_of([] {
            design_static_full_state(mat({{0}}), mat({{1}}), 1.0, mat({{1}}), 0.4);
          }) == ErrorKind::InvalidArgument);
  }
  SUBCASE("Q must be positive definite") {
    CHECK(kind_of([] { design_static_full_state(mat({{0}}), mat({{1}}), 1.0, mat({{0}})); }) ==
          ErrorKind::InvalidArgument);
  }
}

TEST_CASE("static gain stabilizes A + l B F for every l >= beta on random marginal systems") {
  std::mt19937 rng(1234);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial % 4, m = 1 + trial % 2;
    // Repeated real eigenvalues with a single input are genuinely uncontrollable; redraw.
    Matrix A, B;
    do {
      A = random_marginal_matrix(n, rng);
      B = random_matrix(n, m, rng);
    } while (!is_controllable(A, B));
    const double beta = 0.2 + 2.0 * unit(rng);
    const auto s = design_static_full_state(A, B, beta, random_spd(n, rng));
    for (int k = 0; k < 5; ++k) {
      const double ell = beta * (1.0 + 99.0 * unit(rng));
      CHECK(is_hurwitz(A + ell * B * s.F, 0.0).stable);
    }
  }
}

TEST_CASE("dynamic design examples") {
  SUBCASE("scalar integrator") {
    const auto d = design_dynamic_partial_state(mat({{0}}), mat({{1}}), mat({{1}}), 1.0, 2.0);
    CHECK(d.P_delta(0, 0) == doctest::Approx(std::sqrt(d.delta)).epsilon(1e-9));
    for (int k = 0; k < 20; ++k) {
      const double ell = 1.0 + k / 19.0;
      CHECK(is_hurwitz(coupled_error_matrix(mat({{0}}), mat({{1}}), mat({{1}}), d.K, d.P_delta,
                                            1.0, ell))
                .stable);
    }
  }
  SUBCASE("double integrator with position measurement") {
    const Matrix C = mat({{1, 0}});
    const auto d = design_dynamic_partial_state(kDoubleA, kDoubleB, C, 1.0, 3.0);
    CHECK(d.delta > 0.0);
    CHECK(d.grid_abscissa < 0.0);
    CHECK(is_hurwitz(kDoubleA + d.K * C, 0.1).stable);
    CHECK((d.Ac - (kDoubleA + d.K * C)).norm() == 0.0);
    CHECK((d.Bc + d.K).norm() == 0.0);
    CHECK((d.Cc + kDoubleB.transpose() * d.P_delta).norm() <= 1e-15);
    CHECK(d.Dc.isZero(0.0));
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> ell(1.0, 3.0);
    for (int k = 0; k < 100; ++k) {
      CHECK(is_hurwitz(coupled_error_matrix(kDoubleA, kDoubleB, C, d.K, d.P_delta, 1.0, ell(rng)))
                .stable);
    }
  }
  SUBCASE("unobservable measurement") {
    CHECK(kind_of([] {
            design_dynamic_partial_state(kDoubleA, kDoubleB, mat({{0, 0}}), 1.0, 3.0);
          }) == ErrorKind::NotObservable);
  }
}

TEST_CASE("error system assembly") {
  SUBCASE("identical scalar integrators") {
    const auto e = hetero_error_system(integrator(), integrator());
    CHECK(e.A == mat({{0, 0}, {0, 0}}));
    CHECK(e.B == mat({{1}, {0}}));
    CHECK(e.C == mat({{1, -1}}));
  }
  SUBCASE("stable follower, integrator root") {
    CHECK(hetero_error_system(stable_scalar(), integrator()).A == mat({{-1, 0}, {0, 0}}));
  }
  SUBCASE("double-integrator root, scalar follower") {
    const auto e = hetero_error_system(integrator(), double_integrator());
    CHECK(e.A == mat({{0, 0, 0}, {0, 0, 1}, {0, 0, 0}}));
    CHECK(e.B == mat({{1}, {0}, {0}}));
    CHECK(e.C == mat({{1, -1, 0}}));
  }
  SUBCASE("output dimensions must agree") {
    const AgentModel two_outputs{kDoubleA, kDoubleB, Matrix::Identity(2, 2)};
    CHECK(kind_of([&] { hetero_error_system(two_outputs, integrator()); }) ==
          ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("transform of the error system") {
  SUBCASE("identical agents share every mode") {
    const auto t = hetero_transform(double_integrator(), double_integrator());
    CHECK(t.q == 2);
    CHECK(t.k == 0);
    CHECK(t.Abar == kDoubleA);
    CHECK(t.conjugation_residual <= 1e-8);
  }
  SUBCASE("different scalar dynamics share nothing") {
    const auto t = hetero_transform(stable_scalar(), integrator());
    CHECK(t.q == 0);
    CHECK(t.k == 1);
    CHECK(t.A22.norm() <= 1e-12);
    CHECK(t.conjugation_residual <= 1e-8);
  }
  SUBCASE("second-order follower sharing the root's integrator mode") {
    const AgentModel follower{mat({{0, 0}, {0, -2}}), mat({{1}, {1}}), mat({{1, 1}})};
    const auto t = hetero_transform(follower, integrator());
    CHECK(t.q == 1);
    CHECK(t.k == 0);
    CHECK(t.conjugation_residual <= 1e-8);
  }
  SUBCASE("exosystem with an oscillator the follower lacks") {
    const AgentModel root{mat({{0, 1}, {-1, 0}}), mat({{0}, {1}}), mat({{1, 0}})};
    const auto t = hetero_transform(double_integrator(), root);
    CHECK(t.q == 0);
    CHECK(t.k == 2);
    CHECK(t.conjugation_residual <= 1e-8);
    // Lambda and Phi complete the shared-mode basis to nonsingular matrices.
    CHECK(std::abs(t.Lambda.determinant()) > 1e-8);
    CHECK(std::abs(t.Phi.determinant()) > 1e-8);
  }
  SUBCASE("unobservable follower") {
    const AgentModel blind{kDoubleA, kDoubleB, mat({{0, 1}})};
    CHECK(kind_of([&] { hetero_transform(blind, integrator()); }) == ErrorKind::NotObservable);
  }
}

TEST_CASE("chain form examples") {
  SUBCASE("scalar integrator, one block") {
    const auto c = build_chain_form(mat({{0}}), mat({{1}}), mat({{1}}), 1);
    CHECK(c.Xi == mat({{1}}));
    CHECK(c.G == mat({{0}}));
    CHECK(c.Ao == mat({{0}}));
  }
  SUBCASE("double integrator is already a chain") {
    const auto c = build_chain_form(kDoubleA, kDoubleB, mat({{1, 0}}), 2);
    CHECK(c.Xi == Matrix::Identity(2, 2));
    CHECK(c.G.isZero(0.0));
    CHECK(c.intertwining_residual == 0.0);
  }
  SUBCASE("stable scalar with two blocks") {
    const auto c = build_chain_form(mat({{-1}}), mat({{1}}), mat({{2}}), 2);
    CHECK(c.Xi == mat({{2}, {-2}}));
    // G = C A^2 (Xi^T Xi)^{-1} Xi^T = 2 * (1/8) * [2, -2]
    CHECK((c.G - mat({{0.5, -0.5}})).norm() <= 1e-15);
    CHECK(c.intertwining_residual <= 1e-8);
    CHECK(c.Bo == mat({{2}, {-2}}));
  }
  SUBCASE("non-injective map") {
    CHECK(kind_of([] { build_chain_form(Matrix::Identity(2, 2), kDoubleB, mat({{1, 0}}), 3); }) ==
          ErrorKind::NotObservable);
  }
}

TEST_CASE("high-gain observer design") {
  SUBCASE("single scalar block") {
    const auto c = build_chain_form(mat({{0}}), mat({{1}}), mat({{1}}), 1);
    const auto obs = design_hetero_observer({c}, {1.0}, 0.5, Matrix());
    CHECK(obs.Q_eps(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(obs.mismatch_norm[0] <= 1.0);
  }
  SUBCASE("identical integrators need no mismatch correction") {
    const auto c = build_chain_form(mat({{0}}), mat({{1}}), mat({{1}}), 2);
    const auto obs = design_hetero_observer({c, c}, {1.0, 2.0}, 1.0, Matrix());
    CHECK(obs.halvings == 0);
    CHECK(obs.K_eps_agent[0].isZero(0.0));
    CHECK(obs.K_eps_agent[1].isZero(0.0));
  }
  SUBCASE("mixed network is certified at the accepted epsilon") {
    const auto tree = chain({1.0, 1.0}, 1.0);
    const auto design =
        design_heterogeneous({integrator(), stable_scalar(), double_integrator()}, tree);
    const auto& obs = design.observer;
    CHECK(design.nbar == 3);
    CHECK(obs.epsilon > 0.0);
    const Matrix Ao = chain_matrix(1, 3);
    const Matrix Co = mat({{1, 0, 0}});
    for (std::size_t i = 0; i < design.controllers.size(); ++i) {
      CHECK(2.0 * norm2(obs.K_eps_agent[i] * obs.Q_eps) <= 1.0);
      const double ell = tree.diagonal(design.controllers[i].agent);
      const Matrix M = Ao + obs.K_eps - ell * obs.Q_eps * Co.transpose() * Co - obs.K_eps_agent[i];
      CHECK(is_hurwitz(M).stable);
    }
    // Riccati residual of the shifted filter equation.
    const Matrix As = Ao + obs.K_eps;
    const Matrix res = As * obs.Q_eps + obs.Q_eps * As.transpose() -
                       2.0 * tree.beta() * obs.Q_eps * Co.transpose() * Co * obs.Q_eps +
                       Matrix::Identity(3, 3);
    CHECK(norm2(res) <= 1e-9);
    CHECK(obs.H_eps == high_gain_scaling(1, 3, obs.epsilon));
  }
}

TEST_CASE("regulator-based feedback") {
  SUBCASE("no exosystem") {
    const Matrix empty_row(0, 0);
    const auto fb = design_hetero_feedback(double_integrator(), Matrix::Zero(2, 0),
                                           Matrix::Zero(0, 0), Matrix::Zero(1, 0));
    CHECK(fb.F == fb.K);
    CHECK(is_hurwitz(kDoubleA + kDoubleB * fb.K, 0.1).stable);
  }
  SUBCASE("stable scalar follower") {
    const auto fb = design_hetero_feedback(stable_scalar(), mat({{0}}), mat({{0}}), mat({{1}}));
    CHECK(std::abs(fb.Pi(0, 0) - 1.0) <= 1e-10);
    CHECK(std::abs(fb.Gamma(0, 0) - 1.0) <= 1e-10);
    CHECK(fb.F(0, 0) == fb.K(0, 0));
    CHECK(fb.F(0, 1) == doctest::Approx(1.0 - fb.K(0, 0)));
  }
  SUBCASE("invariant zero on the exosystem mode") {
    const AgentModel zero_at_origin{kDoubleA, kDoubleB, mat({{0, 1}})};
    CHECK(kind_of([&] {
            design_hetero_feedback(zero_at_origin, Matrix::Zero(2, 1), mat({{0}}), mat({{1}}));
          }) == ErrorKind::RankDeficient);
  }
}

TEST_CASE("rosenbrock rank") {
  CHECK(rosenbrock_rank_check(mat({{0}}), mat({{1}}), mat({{1}}), 0.0));
  CHECK_FALSE(rosenbrock_rank_check(mat({{0}}), mat({{1}}), mat({{0}}), 0.0));
  CHECK(rosenbrock_rank_check(kDoubleA, kDoubleB, mat({{1, 0}}), 0.0));
  CHECK_FALSE(rosenbrock_rank_check(kDoubleA, kDoubleB, mat({{0, 1}}), 0.0));
}

TEST_CASE("designs are deterministic") {
  const auto tree = chain({1.0, 2.0}, 1.0, 3.0);
  const auto a = design_dynamic_partial_state(kDoubleA, kDoubleB, mat({{1, 0}}), 1.0, 3.0);
  const auto b = design_dynamic_partial_state(kDoubleA, kDoubleB, mat({{1, 0}}), 1.0, 3.0);
  CHECK(a.P_delta == b.P_delta);
  CHECK(a.K == b.K);
  const std::vector<AgentModel> agents{integrator(), stable_scalar(), double_integrator()};
  const auto h1 = design_heterogeneous(agents, tree);
  const auto h2 = design_heterogeneous(agents, tree);
  CHECK(h1.observer.Q_eps == h2.observer.Q_eps);
  for (std::size_t i = 0; i < h1.controllers.size(); ++i) {
    CHECK(h1.controllers[i].feedback.F == h2.controllers[i].feedback.F);
    CHECK(h1.controllers[i].transform.T == h2.controllers[i].transform.T);
  }
}

TEST_CASE("heterogeneous design rejects a short chain length") {
  const auto tree = chain({1.0, 1.0}, 1.0);
  HeteroDesignOptions opt;
  opt.nbar = 2;
  CHECK(kind_of([&] {
          design_heterogeneous({integrator(), stable_scalar(), double_integrator()}, tree, opt);
        }) == ErrorKind::InvalidArgument);
}
