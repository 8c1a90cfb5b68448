#include "tdmpc/trigger.hpp"

#include "tdmpc/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tdmpc {

double deviation_bound(const AgentModel& agent, const MatrixXd& phi, int l, int Mk)
{
  if (l < 0 || Mk < 1) { throw std::invalid_argument("deviation_bound: need l >= 0 and Mk >= 1"); }
  const double w = agent.w_bar();
  if (w == 0.0) { return 0.0; }
  const double a = spectral_norm(agent.A);
  return std::sqrt(lambda_max_sym(phi)) * w * std::pow(a, l) * geometric_sum(a, Mk);
}

CostBound cost_decrease_bound_g(const AgentModel& agent, int Mk, const OcpSolution& sol,
                                const TerminalIngredients& ing)
{
  const int N = static_cast<int>(sol.z.size()) - 1;
  if (N < 1 || Mk < 1 || Mk > N) { throw std::invalid_argument("cost_decrease_bound_g: Mk must lie in 1..N"); }
  const auto m = sol.u.size() / N;
  const auto& Q = agent.Q;
  const auto& R = agent.R;

  CostBound b;
  for (int l = 0; l < Mk; ++l) {
    const auto& z = sol.z[static_cast<std::size_t>(l)];
    const VectorXd u = sol.u.segment(l * m, m);
    b.stage += z.dot(Q * z) + u.dot(R * u);
  }
  for (int l = 0; l < N - Mk; ++l) {
    const double dq = deviation_bound(agent, Q, l, Mk);
    b.g0 += 2.0 * weighted_norm(sol.z[static_cast<std::size_t>(Mk + l)], Q) * dq + dq * dq;
  }
  const double dp = deviation_bound(agent, ing.P, N - Mk, Mk);
  b.g0 += 2.0 * weighted_norm(sol.z.back(), ing.P) * dp + dp * dp;
  b.g = b.g0 - b.stage;
  return b;
}

std::vector<CostBound> cost_bound_profile(const AgentModel& agent, const OcpSolution& sol,
                                          const TerminalIngredients& ing)
{
  const int N = static_cast<int>(sol.z.size()) - 1;
  std::vector<CostBound> out;
  out.reserve(static_cast<std::size_t>(N));
  for (int M = 1; M <= N; ++M) { out.push_back(cost_decrease_bound_g(agent, M, sol, ing)); }
  return out;
}

TriggerDecision select_Mk(const std::vector<std::vector<double>>& g)
{
  TriggerDecision d;
  d.g = g;
  d.Mk = g.empty() ? 1 : 0;
  for (const auto& gi : g) {
    int best = 0;
    for (int M = 1; M <= static_cast<int>(gi.size()); ++M) {
      const double v = gi[static_cast<std::size_t>(M - 1)];
      if (v < 0.0 && (best == 0 || v <= gi[static_cast<std::size_t>(best - 1)])) { best = M; }
    }
    d.fallback.push_back(best == 0);
    d.Mk_i.push_back(best == 0 ? 1 : best);
    d.Mk = d.Mk == 0 ? d.Mk_i.back() : std::min(d.Mk, d.Mk_i.back());
  }
  return d;
}

}  // namespace tdmpc
