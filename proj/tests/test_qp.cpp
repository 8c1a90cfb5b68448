#include "doctest.h"

#include "tdmpc/qp.hpp"

#include <cmath>
#include <limits>

using namespace tdmpc;

namespace {

// Grid search over a 2D box, refined twice around the best point.
VectorXd grid_minimum(const ConicQp& qp, double lo, double hi)
{
  double best = std::numeric_limits<double>::infinity();
  VectorXd arg = VectorXd::Zero(2);
  double a0 = lo, a1 = hi, b0 = lo, b1 = hi;
  for (int pass = 0; pass < 4; ++pass) {
    const int n = 400;
    for (int i = 0; i <= n; ++i) {
      for (int j = 0; j <= n; ++j) {
        VectorXd x(2);
        x << a0 + (a1 - a0) * i / n, b0 + (b1 - b0) * j / n;
        if (qp.max_violation(x) > 0.0) { continue; }
        const double f = qp.objective(x);
        if (f < best) {
          best = f;
          arg = x;
        }
      }
    }
    const double ha = (a1 - a0) / 40.0, hb = (b1 - b0) / 40.0;
    a0 = arg(0) - ha;
    a1 = arg(0) + ha;
    b0 = arg(1) - hb;
    b1 = arg(1) + hb;
  }
  return arg;
}

ConicQp base_problem()
{
  ConicQp qp;
  qp.H.resize(2, 2);
  qp.H << 4.0, 1.0, 1.0, 2.0;
  qp.q.resize(2);
  qp.q << -8.0, -3.0;
  qp.C.resize(0, 2);
  qp.d.resize(0);
  return qp;
}

}  // namespace

TEST_CASE("unconstrained problem returns the Newton point")
{
  const ConicQp qp = base_problem();
  const auto r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::Solved);
  const VectorXd x = -qp.H.ldlt().solve(qp.q);
  CHECK((r.x - x).norm() < 1e-7);
  CHECK(r.objective == doctest::Approx(qp.objective(x)));
}

TEST_CASE("box-constrained problem against a grid oracle")
{
  ConicQp qp = base_problem();
  qp.C.resize(4, 2);
  qp.C << 1, 0, -1, 0, 0, 1, 0, -1;
  qp.d = VectorXd::Constant(4, 1.0);
  qp.d(0) = 0.5;  // x1 <= 0.5 binds
  const auto r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::Solved);
  const VectorXd g = grid_minimum(qp, -1.0, 1.0);
  CHECK((r.x - g).norm() < 1e-4);
  CHECK(r.x(0) == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(qp.max_violation(r.x) < 1e-7);
}

TEST_CASE("ball constraint is enforced through projection")
{
  ConicQp qp = base_problem();
  BallConstraint ball;
  ball.S = MatrixXd::Identity(2, 2);
  ball.c = VectorXd::Zero(2);
  ball.radius = 0.5;
  qp.balls.push_back(ball);
  const auto r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::Solved);
  CHECK(r.x.norm() == doctest::Approx(0.5).epsilon(1e-6));
  // oracle: minimise over the circle by dense angular search
  double best = std::numeric_limits<double>::infinity();
  VectorXd arg(2);
  for (int k = 0; k < 200000; ++k) {
    const double th = 2.0 * M_PI * k / 200000.0;
    VectorXd x(2);
    x << 0.5 * std::cos(th), 0.5 * std::sin(th);
    if (qp.objective(x) < best) {
      best = qp.objective(x);
      arg = x;
    }
  }
  CHECK((r.x - arg).norm() < 1e-4);
  CHECK(qp.num_rows() == 2);
}

TEST_CASE("shifted ball with linear rows")
{
  ConicQp qp = base_problem();
  qp.C.resize(1, 2);
  qp.C << 0.0, 1.0;
  qp.d = VectorXd::Constant(1, 0.2);
  BallConstraint ball;
  ball.S = MatrixXd::Identity(2, 2);
  ball.c = VectorXd::Constant(2, -0.5);  // centre (0.5, 0.5)
  ball.radius = 0.6;
  qp.balls.push_back(ball);
  const auto r = solve_qp(qp);
  REQUIRE(r.status == QpStatus::Solved);
  CHECK(qp.max_violation(r.x) < 1e-7);
  const VectorXd g = grid_minimum(qp, -0.2, 1.2);
  CHECK(qp.objective(r.x) <= qp.objective(g) + 1e-6);
  CHECK((r.x - g).norm() < 1e-3);
}

TEST_CASE("contradictory rows are reported infeasible")
{
  ConicQp qp = base_problem();
  qp.C.resize(2, 2);
  qp.C << 1, 0, -1, 0;
  qp.d = VectorXd::Constant(2, -1.0);  // x1 <= -1 and x1 >= 1
  const auto r = solve_qp(qp);
  CHECK(r.status == QpStatus::Infeasible);
}

TEST_CASE("ball projection")
{
  VectorXd s(2);
  s << 3.0, 4.0;
  const VectorXd p = project_ball(s, 1.0);
  CHECK(p(0) == doctest::Approx(0.6));
  CHECK(p(1) == doctest::Approx(0.8));
  CHECK(project_ball(p * 0.5, 1.0) == p * 0.5);
  CHECK(project_ball(s, 0.0).norm() == 0.0);
}

TEST_CASE("solver is deterministic and warm starts reproduce the answer")
{
  ConicQp qp = base_problem();
  qp.C.resize(1, 2);
  qp.C << 1.0, 1.0;
  qp.d = VectorXd::Constant(1, 0.3);
  const auto a = solve_qp(qp);
  const auto b = solve_qp(qp);
  CHECK(a.x == b.x);
  CHECK(a.iterations == b.iterations);
  const auto w = a.warm();
  const auto c = solve_qp(qp, {}, &w);
  CHECK(c.status == QpStatus::Solved);
  CHECK((c.x - a.x).norm() < 1e-7);
  CHECK(c.iterations <= a.iterations);
}
