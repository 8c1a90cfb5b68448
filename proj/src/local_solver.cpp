#include "tdmpc/local_solver.hpp"

#include <algorithm>
#include <stdexcept>

namespace tdmpc {

std::vector<VectorXd> CondensedOcp::trajectory(const VectorXd& u) const
{
  std::vector<VectorXd> z;
  z.reserve(static_cast<std::size_t>(N) + 1);
  for (int l = 0; l <= N; ++l) {
    const auto idx = static_cast<std::size_t>(l);
    z.push_back(pred.Phi[idx] * x0 + pred.Gamma[idx] * u);
  }
  return z;
}

double CondensedOcp::cost(const VectorXd& u) const
{
  const auto z = trajectory(u);
  double J = 0.0;
  for (int l = 0; l < N; ++l) {
    const auto& zl = z[static_cast<std::size_t>(l)];
    const VectorXd ul = u.segment(l * m, m);
    J += zl.dot(Q * zl) + ul.dot(R * ul);
  }
  J += z.back().dot(P * z.back());
  return J;
}

ConicQp CondensedOcp::to_qp(const VectorXd& lambda) const
{
  ConicQp qp;
  qp.H = H;
  qp.q = q;
  if (lambda.size() > 0) { qp.q += coupling.F.transpose() * lambda; }
  qp.C = C;
  qp.d = d;
  qp.balls.push_back({term_S, term_c, eps_r});
  return qp;
}

CondensedOcp condense(const AgentModel& agent, const TerminalIngredients& ing, const TightenedSets& sets,
                      const MatrixXd& psi_x, const MatrixXd& psi_u, const VectorXd& x0, int N,
                      const VectorXd& rhs_share)
{
  if (N < 1 || sets.Z.size() < static_cast<std::size_t>(N) || x0.size() != agent.n()) {
    throw std::invalid_argument("condense: inconsistent horizon, sets or initial state");
  }
  CondensedOcp ocp;
  ocp.N = N;
  ocp.n = agent.n();
  ocp.m = agent.m();
  ocp.x0 = x0;
  ocp.pred = Prediction::build(agent.A, agent.B, N);
  ocp.Q = agent.Q;
  ocp.R = agent.R;
  ocp.P = ing.P;
  const auto m = ocp.m;
  const auto nu = N * m;

  ocp.H = MatrixXd::Zero(nu, nu);
  ocp.q = VectorXd::Zero(nu);
  const VectorXd z0 = x0;
  ocp.cost_const = z0.dot(agent.Q * z0);
  for (int l = 1; l <= N; ++l) {
    const auto idx = static_cast<std::size_t>(l);
    const MatrixXd& W = l < N ? agent.Q : ing.P;
    const MatrixXd& G = ocp.pred.Gamma[idx];
    const VectorXd free = ocp.pred.Phi[idx] * x0;
    ocp.H += G.transpose() * W * G;
    ocp.q += G.transpose() * W * free;
    ocp.cost_const += free.dot(W * free);
  }
  for (int l = 0; l < N; ++l) { ocp.H.block(l * m, l * m, m, m) += agent.R; }
  ocp.H = (ocp.H + ocp.H.transpose()).eval();  // 2 (sum + blkdiag R), symmetrised
  ocp.q *= 2.0;

  Eigen::Index rows = N * agent.U.faces();
  for (int l = 1; l < N; ++l) { rows += sets.Z[static_cast<std::size_t>(l)].faces(); }
  ocp.C = MatrixXd::Zero(rows, nu);
  ocp.d = VectorXd::Zero(rows);
  Eigen::Index r = 0;
  for (int l = 1; l < N; ++l) {
    const auto idx = static_cast<std::size_t>(l);
    const auto& Z = sets.Z[idx];
    ocp.C.middleRows(r, Z.faces()) = Z.G * ocp.pred.Gamma[idx];
    ocp.d.segment(r, Z.faces()) = Z.h - Z.G * ocp.pred.Phi[idx] * x0;
    r += Z.faces();
  }
  for (int l = 0; l < N; ++l) {
    const auto f = agent.U.faces();
    ocp.C.block(r, l * m, f, m) = agent.U.G;
    ocp.d.segment(r, f) = agent.U.h;
    r += f;
  }

  const MatrixXd Lt = Eigen::LLT<MatrixXd>(ing.P).matrixU();  // P = L L', Lt = L'
  ocp.term_S = Lt * ocp.pred.Gamma.back();
  ocp.term_c = Lt * ocp.pred.Phi.back() * x0;
  ocp.eps_r = ing.eps_r;

  ocp.coupling = coupling_affine(agent, psi_x, psi_u, x0, N);
  ocp.rhs_share = rhs_share;
  if (rhs_share.size() != ocp.coupling.F.rows()) {
    throw std::invalid_argument("condense: coupling right-hand side has the wrong length");
  }
  return ocp;
}

const char* to_string(OcpStatus s)
{
  switch (s) {
    case OcpStatus::Optimal: return "optimal";
    case OcpStatus::Infeasible: return "infeasible";
    case OcpStatus::IterationCap: return "iteration-cap";
  }
  return "unknown";
}

namespace {

OcpStatus classify(const QpResult& r, double violation)
{
  if (r.status == QpStatus::Infeasible) { return OcpStatus::Infeasible; }
  if (r.status == QpStatus::Solved && violation <= kFeasibilityTol) { return OcpStatus::Optimal; }
  return OcpStatus::IterationCap;
}

}  // namespace

OcpSolution solve_inner(const CondensedOcp& ocp, const VectorXd& lambda, const QpSettings& settings,
                        const QpWarmStart* warm)
{
  if (lambda.size() != 0 && lambda.size() != ocp.coupling.F.rows()) {
    throw std::invalid_argument("solve_inner: multiplier has the wrong length");
  }
  if (lambda.size() != 0 && (lambda.array() < 0.0).any()) {
    throw std::invalid_argument("solve_inner: multiplier must be nonnegative");
  }
  const ConicQp qp = ocp.to_qp(lambda);
  const QpResult r = solve_qp(qp, settings, warm);

  OcpSolution s;
  s.u = r.x;
  s.z = ocp.trajectory(r.x);
  s.cost = ocp.cost(r.x);
  s.inner_objective = s.cost;
  if (lambda.size() != 0) { s.inner_objective += lambda.dot(ocp.coupling(r.x) - ocp.rhs_share); }
  s.max_violation = qp.max_violation(r.x);
  s.status = classify(r, s.max_violation);
  s.primal_residual = r.primal_residual;
  s.dual_residual = r.dual_residual;
  s.iterations = r.iterations;
  s.warm = r.warm();
  return s;
}

CentralizedSolution solve_centralized(const std::vector<CondensedOcp>& ocps, const VectorXd& b,
                                      const QpSettings& settings)
{
  if (ocps.empty()) { throw std::invalid_argument("solve_centralized: no agents"); }
  const auto pc = b.size();
  Eigen::Index nv = 0;
  Eigen::Index nl = 0;
  for (const auto& o : ocps) {
    if (o.coupling.F.rows() != pc) { throw std::invalid_argument("solve_centralized: coupling length mismatch"); }
    nv += o.H.rows();
    nl += o.C.rows();
  }

  ConicQp qp;
  qp.H = MatrixXd::Zero(nv, nv);
  qp.q = VectorXd::Zero(nv);
  qp.C = MatrixXd::Zero(nl + pc, nv);
  qp.d = VectorXd::Zero(nl + pc);
  qp.d.tail(pc) = b;
  Eigen::Index col = 0;
  Eigen::Index row = 0;
  for (const auto& o : ocps) {
    const auto k = o.H.rows();
    qp.H.block(col, col, k, k) = o.H;
    qp.q.segment(col, k) = o.q;
    qp.C.block(row, col, o.C.rows(), k) = o.C;
    qp.d.segment(row, o.C.rows()) = o.d;
    qp.C.block(nl, col, pc, k) = o.coupling.F;
    qp.d.tail(pc) -= o.coupling.f0;
    BallConstraint ball{MatrixXd::Zero(o.term_S.rows(), nv), o.term_c, o.eps_r};
    ball.S.middleCols(col, k) = o.term_S;
    qp.balls.push_back(std::move(ball));
    col += k;
    row += o.C.rows();
  }

  const QpResult r = solve_qp(qp, settings);

  CentralizedSolution out;
  out.iterations = r.iterations;
  col = 0;
  VectorXd coupled = VectorXd::Zero(pc);
  for (const auto& o : ocps) {
    const auto k = o.H.rows();
    OcpSolution s;
    s.u = r.x.segment(col, k);
    s.z = o.trajectory(s.u);
    s.cost = o.cost(s.u);
    s.inner_objective = s.cost;
    s.max_violation = o.to_qp(VectorXd()).max_violation(s.u);
    s.iterations = r.iterations;
    s.primal_residual = r.primal_residual;
    s.dual_residual = r.dual_residual;
    s.warm.x = s.u;
    coupled += o.coupling(s.u);
    out.total_cost += s.cost;
    out.agents.push_back(std::move(s));
    col += k;
  }
  const double violation = qp.max_violation(r.x);
  out.status = classify(r, violation);
  for (auto& s : out.agents) { s.status = out.status; }
  if (out.status != OcpStatus::Optimal && pc > 0) {
    const VectorXd excess = coupled - b;
    out.most_violated_value = excess.maxCoeff(&out.most_violated_row);
  }
  return out;
}

CentralizedSolution solve_centralized(const Scenario& scenario, const std::vector<TerminalIngredients>& ingredients,
                                      const std::vector<TightenedSets>& sets, const ToleranceSchedule& schedule,
                                      const std::vector<VectorXd>& x0_all, const QpSettings& settings)
{
  const auto M = scenario.num_agents();
  std::vector<CondensedOcp> ocps;
  ocps.reserve(M);
  const VectorXd share = schedule.b / static_cast<double>(M);
  for (std::size_t i = 0; i < M; ++i) {
    ocps.push_back(condense(scenario.agents[i], ingredients[i], sets[i], scenario.coupling.psi_x[i],
                            scenario.coupling.psi_u[i], x0_all[i], scenario.horizon, share));
  }
  return solve_centralized(ocps, schedule.b, settings);
}

QpSettings qp_settings(const SolverConfig& cfg)
{
  QpSettings s;
  s.max_iter = cfg.qp_max_iter;
  s.eps_abs = cfg.qp_tol;
  s.eps_rel = std::min(s.eps_rel, cfg.qp_tol);
  return s;
}

}  // namespace tdmpc
