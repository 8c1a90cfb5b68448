#include "doctest.h"

#include "common.hpp"
#include "tdmpc/dual_admm.hpp"
#include "tdmpc/linalg.hpp"
#include "tdmpc/simulator.hpp"

#include <sstream>

using namespace tdmpc;

namespace {

std::vector<CondensedOcp> build_ocps(const Scenario& sc, const OfflineDesign& d)
{
  std::vector<CondensedOcp> ocps;
  const VectorXd share = d.schedule.b / static_cast<double>(sc.num_agents());
  for (std::size_t i = 0; i < sc.num_agents(); ++i) {
    ocps.push_back(condense(sc.agents[i], d.ingredients[i], d.sets[i], sc.coupling.psi_x[i], sc.coupling.psi_u[i],
                            sc.x0[i], sc.horizon, share));
  }
  return ocps;
}

AdmmParams binding_params()
{
  AdmmParams p;
  p.rho = 0.1;
  p.max_iter = 5000;
  return p;
}

}  // namespace

TEST_CASE("consensus map is a path incidence matrix")
{
  CHECK(consensus_map(1, 2, 5).rows() == 0);

  const auto m2 = consensus_map(2, 1, 1);
  REQUIRE(m2.rows() == 1);
  CHECK(m2.E[0](0, 0) == 1.0);
  CHECK(m2.E[1](0, 0) == -1.0);

  const auto m4 = consensus_map(4, 1, 2);
  REQUIRE(m4.rows() == 6);
  MatrixXd Es(6, 0);
  for (const auto& E : m4.E) {
    MatrixXd next(6, Es.cols() + E.cols());
    next << Es, E;
    Es = next;
  }
  // oracle: path Laplacian on 4 nodes, Kronecker I_2 (blocks ordered by agent)
  MatrixXd L = MatrixXd::Zero(4, 4);
  for (int k = 0; k < 3; ++k) {
    L(k, k) += 1;
    L(k + 1, k + 1) += 1;
    L(k, k + 1) -= 1;
    L(k + 1, k) -= 1;
  }
  MatrixXd LI = MatrixXd::Zero(8, 8);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) { LI.block(2 * i, 2 * j, 2, 2) = L(i, j) * MatrixXd::Identity(2, 2); }
  }
  CHECK((Es.transpose() * Es - LI).cwiseAbs().maxCoeff() == 0.0);
  CHECK(lambda_max_sym(Es.transpose() * Es) == doctest::Approx(2.0 + 2.0 * std::cos(M_PI / 4.0)));
  CHECK(lambda_max_sym(Es.transpose() * Es) < 4.0);

  std::vector<VectorXd> same(4, VectorXd::Constant(2, 3.0));
  CHECK(m4.apply(same).norm() == 0.0);
}

TEST_CASE("multiplier step examples")
{
  const auto map = consensus_map(2, 1, 1);
  AdmmState st;
  st.lambda = {VectorXd::Constant(1, 1.0), VectorXd::Constant(1, 0.0)};
  st.omega = VectorXd::Zero(1);
  // residual pushes agent 0 up and agent 1 down; consensus pulls them together
  const std::vector<VectorXd> residual = {VectorXd::Constant(1, 0.5), VectorXd::Constant(1, -0.5)};
  const auto next = lambda_update(st, map, residual, 1.0, 2.0);
  // lambda0 = 1 + (0.5 - 1)/2, lambda1 = max(0, 0 + (-0.5 + 1)/2)
  CHECK(next[0](0) == doctest::Approx(0.75));
  CHECK(next[1](0) == doctest::Approx(0.25));

  // clipping
  st.lambda = {VectorXd::Constant(1, 0.1), VectorXd::Constant(1, 0.1)};
  const auto clipped = lambda_update(st, map, {VectorXd::Constant(1, -5.0), VectorXd::Constant(1, -5.0)}, 1.0, 1.0);
  CHECK(clipped[0](0) == 0.0);
  CHECK(clipped[1](0) == 0.0);
}

TEST_CASE("dual variable step example")
{
  const auto map = consensus_map(2, 1, 1);
  const VectorXd omega = VectorXd::Constant(1, 2.0);
  const std::vector<VectorXd> lambda = {VectorXd::Constant(1, 3.0), VectorXd::Constant(1, 2.0)};
  CHECK(omega_update(omega, map, lambda, 1.0, 1.0)(0) == doctest::Approx(1.0));
  CHECK(omega_update(omega, map, lambda, 2.0, 0.5)(0) == doctest::Approx(1.0));
  CHECK(omega_update(omega, consensus_map(1, 1, 1), {lambda[0]}, 1.0, 1.0) == omega);
}

TEST_CASE("two-agent consensus iteration against a matrix-power oracle")
{
  const auto map = consensus_map(2, 1, 1);
  const double rho = 0.7, gamma = 0.8, tau = 2.0;
  AdmmState st;
  st.lambda = {VectorXd::Constant(1, 11.0), VectorXd::Constant(1, 10.0)};
  st.omega = VectorXd::Zero(1);
  const std::vector<VectorXd> zero = {VectorXd::Zero(1), VectorXd::Zero(1)};

  // state s = (l1, l2, w); with zero residual and no clipping the update is linear:
  // d = (w - rho (l1 - l2)) / tau, l1' = l1 + d, l2' = l2 - d, w' = w - rho gamma (l1' - l2')
  MatrixXd T1(3, 3);
  T1 << 1 - rho / tau, rho / tau, 1 / tau,  //
      rho / tau, 1 - rho / tau, -1 / tau,   //
      0, 0, 1;
  MatrixXd T2 = MatrixXd::Identity(3, 3);
  T2(2, 0) = -rho * gamma;
  T2(2, 1) = rho * gamma;
  const MatrixXd T = T2 * T1;
  VectorXd s(3);
  s << 11, 10, 0;
  for (int k = 1; k <= 25; ++k) {
    st.lambda = lambda_update(st, map, zero, rho, tau);
    st.omega = omega_update(st.omega, map, st.lambda, rho, gamma);
    s = T * s;
    REQUIRE(st.lambda[1](0) > 0.0);
  }
  CHECK(st.lambda[0](0) == doctest::Approx(s(0)).epsilon(1e-12));
  CHECK(st.lambda[1](0) == doctest::Approx(s(1)).epsilon(1e-12));
  CHECK(st.omega(0) == doctest::Approx(s(2)).epsilon(1e-12));
  CHECK(spectral_radius(T) <= 1.0 + 1e-12);
  // the mean is invariant and the difference decays
  CHECK(st.lambda[0](0) + st.lambda[1](0) == doctest::Approx(21.0));
  CHECK(std::abs(st.lambda[0](0) - st.lambda[1](0)) < 1.0);
}

TEST_CASE("parameter validation")
{
  AdmmParams p;
  p.gamma = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p.gamma = 1.5;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.rho = -1.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  p = {};
  p.max_iter = 0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  CHECK_NOTHROW(AdmmParams{}.validate());
}

TEST_CASE("inactive coupling leaves the multipliers at zero")
{
  const auto sc = load_scenario(testing::scenario_path("four_agent_feasible.json"));
  const auto d = OfflineDesign::build(sc);
  const auto ocps = build_ocps(sc, d);
  const auto r = run_admm(ocps, AdmmParams::from(sc.solver), qp_settings(sc.solver));
  CHECK(r.converged);
  CHECK(r.state.coupling_violation == 0.0);
  for (std::size_t i = 0; i < ocps.size(); ++i) {
    CHECK(r.state.lambda[i].cwiseAbs().maxCoeff() < 1e-12);
    const auto alone = solve_inner(ocps[i], VectorXd::Zero(ocps[i].coupling.F.rows()), qp_settings(sc.solver));
    CHECK((r.state.solutions[i].u - alone.u).cwiseAbs().maxCoeff() < 1e-5);
  }
}

TEST_CASE("binding coupling: distributed solution approaches the centralized optimum")
{
  for (bool two_sided : {false, true}) {
    CAPTURE(two_sided);
    const auto sc = testing::binding_coupling(two_sided, two_sided ? 1.5 : 2.0);
    const auto d = OfflineDesign::build(sc);
    const auto central = solve_centralized(sc, d.ingredients, d.sets, d.schedule, sc.x0, qp_settings(sc.solver));
    REQUIRE(central.status == OcpStatus::Optimal);

    const auto ocps = build_ocps(sc, d);
    // check the instance really binds
    double unconstrained_sum = 0.0;
    for (const auto& o : ocps) {
      unconstrained_sum += solve_inner(o, VectorXd::Zero(o.coupling.F.rows())).u(0);
    }
    CHECK(unconstrained_sum > (two_sided ? 1.0 : 2.0));

    const auto r = run_admm(ocps, binding_params(), qp_settings(sc.solver));
    CHECK(r.converged);
    CHECK(r.state.total_cost() == doctest::Approx(central.total_cost).epsilon(5e-3));
    CHECK(r.state.consensus_spread() <= 1e-4);
    CHECK(r.state.primal_residual <= 1e-4);
    CHECK(r.state.coupling_violation <= 1e-4);
    double lam = 0.0;
    for (const auto& l : r.state.lambda) { lam = std::max(lam, l.maxCoeff()); }
    CHECK(lam > 0.0);
  }
}

TEST_CASE("single agent: the multiplier maximises the dual function")
{
  auto ag = testing::scalar_agent(1.2, 1.0, 100.0, 10.0, 0.0);
  const auto ing = synthesize(ag);
  const auto sets = tighten_local_sets(ag, 1);
  auto ocp = condense(ag, ing, sets, MatrixXd::Zero(1, 1), MatrixXd::Ones(1, 1), VectorXd::Constant(1, -3.0), 1,
                      VectorXd::Constant(1, 0.5));
  ocp.eps_r = 1e6;

  AdmmParams p;
  p.max_iter = 2000;
  p.tol_primal = p.tol_dual = 1e-9;
  const auto r = run_admm({ocp}, p);
  CHECK(r.converged);

  // oracle: golden-section search of the concave dual over [0, 50]
  auto dual = [&](double l) { return solve_inner(ocp, VectorXd::Constant(1, l)).inner_objective; };
  double a = 0.0, b = 50.0;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), e = a + g * (b - a);
  for (int k = 0; k < 80; ++k) {
    if (dual(c) > dual(e)) {
      b = e;
    } else {
      a = c;
    }
    c = b - g * (b - a);
    e = a + g * (b - a);
  }
  const double l_star = 0.5 * (a + b);
  CHECK(r.state.lambda[0](0) == doctest::Approx(l_star).epsilon(1e-5));
  CHECK(r.state.solutions[0].u(0) == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("distributed solve is deterministic")
{
  const auto sc = testing::binding_coupling(false, 2.0);
  const auto d = OfflineDesign::build(sc);
  const auto ocps = build_ocps(sc, d);
  auto p = binding_params();
  p.max_iter = 300;
  const auto a = run_admm(ocps, p);
  const auto b = run_admm(ocps, p);
  REQUIRE(a.trace.size() == b.trace.size());
  std::ostringstream sa, sb;
  write_admm_trace(sa, a.trace);
  write_admm_trace(sb, b.trace);
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("iter,primal_res,dual_res,total_cost\n", 0) == 0);
}

TEST_CASE("infeasible local problems raise")
{
  const auto sc = testing::four_agent();
  const auto d = OfflineDesign::build(sc);
  const auto ocps = build_ocps(sc, d);
  try {
    (void)run_admm(ocps, AdmmParams::from(sc.solver), qp_settings(sc.solver));
    FAIL("expected AdmmError");
  } catch (const AdmmError& e) {
    CHECK(e.agent() == 0);
  }
}
