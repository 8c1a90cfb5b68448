#pragma once

/**
 * @file
 * @brief Prediction-deviation bounds, the cost-decrease bound g and the
 * self-triggered choice of the open-loop interval.
 */

#include "tdmpc/local_solver.hpp"

#include <vector>

namespace tdmpc {

/// sqrt(lambda_max(phi)) w_bar ||A||^l sum_{j<Mk} ||A||^j. Requires l >= 0, Mk >= 1.
double deviation_bound(const AgentModel& agent, const MatrixXd& phi, int l, int Mk);

struct CostBound
{
  double g = 0.0;      ///< g0 - stage
  double g0 = 0.0;     ///< disturbance-induced growth of the shifted candidate
  double stage = 0.0;  ///< sum_{l<Mk} ||z*(l)||_Q^2 + ||u*(l)||_R^2
};

/// Bound on J*(t_k + Mk) - J*(t_k) when the first Mk inputs of `solution` run open loop.
CostBound cost_decrease_bound_g(const AgentModel& agent, int Mk, const OcpSolution& solution,
                                const TerminalIngredients& ingredients);

/// Bounds for Mk = 1..N.
std::vector<CostBound> cost_bound_profile(const AgentModel& agent, const OcpSolution& solution,
                                          const TerminalIngredients& ingredients);

struct TriggerDecision
{
  std::vector<std::vector<double>> g;  ///< per agent, g(M) for M = 1..N
  std::vector<int> Mk_i;
  std::vector<bool> fallback;  ///< no M had g < 0, so Mk_i = 1
  int Mk = 1;
};

/// argmin of g over {M : g(M) < 0}, ties toward larger M, else 1; global Mk = min over agents.
TriggerDecision select_Mk(const std::vector<std::vector<double>>& g);

}  // namespace tdmpc
