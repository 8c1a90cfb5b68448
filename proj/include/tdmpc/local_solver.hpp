#pragma once

/**
 * @file
 * @brief Condensed per-agent optimal control problems, the dual-shifted inner
 * solve used by the distributed method, and a stacked centralized solve.
 */

#include "tdmpc/model.hpp"
#include "tdmpc/prediction.hpp"
#include "tdmpc/qp.hpp"
#include "tdmpc/synthesis.hpp"
#include "tdmpc/tightening.hpp"

#include <vector>

namespace tdmpc {

/// Per-row feasibility tolerance required of an optimal solution.
inline constexpr double kFeasibilityTol = 1e-6;

/**
 * @brief State-eliminated OCP of one agent at one sampling instant.
 *
 * Decision variable is the stacked input sequence u (length N m).
 * Cost J(u) = 1/2 u'Hu + q'u + cost_const.
 */
struct CondensedOcp
{
  int N = 0;
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  VectorXd x0;
  Prediction pred;

  MatrixXd H;
  VectorXd q;
  double cost_const = 0.0;

  MatrixXd C;  ///< tightened state rows (l = 1..N-1) and input rows (l = 0..N-1)
  VectorXd d;

  MatrixXd term_S;  ///< ||term_S u + term_c|| = ||z(N)||_P <= eps_r
  VectorXd term_c;
  double eps_r = 0.0;

  AffineMap coupling;  ///< f(u), length p N
  VectorXd rhs_share;  ///< this agent's share of the tightened coupling right-hand side

  MatrixXd Q;
  MatrixXd R;
  MatrixXd P;

  std::vector<VectorXd> trajectory(const VectorXd& u) const;
  double cost(const VectorXd& u) const;
  /// QP with the linear term shifted by F' lambda.
  ConicQp to_qp(const VectorXd& lambda) const;
};

CondensedOcp condense(const AgentModel& agent, const TerminalIngredients& ingredients, const TightenedSets& sets,
                      const MatrixXd& psi_x, const MatrixXd& psi_u, const VectorXd& x0, int N,
                      const VectorXd& rhs_share);

enum class OcpStatus { Optimal, Infeasible, IterationCap };

const char* to_string(OcpStatus s);

struct OcpSolution
{
  VectorXd u;
  std::vector<VectorXd> z;    ///< N+1 nominal states
  double cost = 0.0;          ///< J, without the dual term
  double inner_objective = 0.0;  ///< J + lambda'(f - rhs_share)
  OcpStatus status = OcpStatus::IterationCap;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double max_violation = 0.0;
  int iterations = 0;
  QpWarmStart warm;
};

/// Minimises J(u) + lambda'(f(u) - rhs_share) over the local constraints. Requires lambda >= 0.
OcpSolution solve_inner(const CondensedOcp& ocp, const VectorXd& lambda, const QpSettings& settings = {},
                        const QpWarmStart* warm = nullptr);

struct CentralizedSolution
{
  std::vector<OcpSolution> agents;
  double total_cost = 0.0;
  OcpStatus status = OcpStatus::IterationCap;
  Eigen::Index most_violated_row = -1;  ///< stacked coupling row, when not optimal
  double most_violated_value = 0.0;
  int iterations = 0;
};

/// All agents jointly, with sum_i f_i(u_i) <= b as hard rows.
CentralizedSolution solve_centralized(const std::vector<CondensedOcp>& ocps, const VectorXd& b,
                                      const QpSettings& settings = {});

/// Builds every agent's OCP at x0_all and solves the stacked problem.
CentralizedSolution solve_centralized(const Scenario& scenario, const std::vector<TerminalIngredients>& ingredients,
                                      const std::vector<TightenedSets>& sets, const ToleranceSchedule& schedule,
                                      const std::vector<VectorXd>& x0_all, const QpSettings& settings = {});

/// QP settings derived from a scenario's solver block.
QpSettings qp_settings(const SolverConfig& cfg);

}  // namespace tdmpc
