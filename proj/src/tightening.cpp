#include "tdmpc/tightening.hpp"

#include "tdmpc/linalg.hpp"
#include "tdmpc/prediction.hpp"
#include "tdmpc/qp.hpp"
#include "tdmpc/synthesis.hpp"

#include <sstream>

namespace tdmpc {

double coupling_norm(const MatrixXd& psi) { return max_row_norm(psi); }

ToleranceSchedule tolerance_schedule_unchecked(const Scenario& scenario,
                                               const std::vector<TerminalIngredients>& ingredients)
{
  const int N = scenario.horizon;
  const auto p = scenario.coupling.p;
  ToleranceSchedule s;
  s.N = N;
  s.p = p;
  s.eps = VectorXd::Zero(N + 1);

  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    const auto& agent = scenario.agents[i];
    const double a = spectral_norm(agent.A);
    const double w = agent.w_bar();
    const double nx = coupling_norm(scenario.coupling.psi_x[i]);
    const double nN = coupling_norm(scenario.coupling.psi_x[i] + scenario.coupling.psi_u[i] * ingredients[i].K);
    for (int l = 1; l < N; ++l) { s.eps(l) += nx * w * geometric_sum(a, l); }
    s.eps(N) += nN * w * geometric_sum(a, N);
  }

  s.b.resize(p * N);
  for (int l = 0; l < N; ++l) { s.b.segment(l * p, p).setConstant(1.0 - s.eps(l)); }
  return s;
}

ToleranceSchedule tolerance_schedule(const Scenario& scenario, const std::vector<TerminalIngredients>& ingredients)
{
  auto s = tolerance_schedule_unchecked(scenario, ingredients);
  if (s.eps(s.N) >= 1.0) {
    std::ostringstream os;
    os << "infeasible tightening: eps(N) = " << s.eps(s.N) << " >= 1";
    throw TighteningError(os.str(), s.eps(s.N), s.N);
  }
  return s;
}

TightenedSets tighten_local_sets(const AgentModel& agent, int N)
{
  const auto& X = agent.X;
  const double w = agent.w_bar();
  TightenedSets sets;
  sets.Z.reserve(static_cast<std::size_t>(N));

  // support[j] = w sum_{k<l} ||(A^k)' g_j||, accumulated as l grows
  VectorXd shrink = VectorXd::Zero(X.faces());
  MatrixXd Gk = X.G;  // rows g_j' A^k
  for (int l = 0; l < N; ++l) {
    HPolytope Z{X.G, X.h - shrink};
    if ((Z.h.array() < 0.0).any()) {
      ConicQp qp{MatrixXd::Identity(X.dim(), X.dim()), VectorXd::Zero(X.dim()), Z.G, Z.h, {}};
      const auto r = solve_qp(qp);
      if (r.status != QpStatus::Solved || qp.max_violation(r.x) > 1e-7) {
        std::ostringstream os;
        os << "local tightening infeasible at step " << l;
        throw TighteningError(os.str(), Z.h.minCoeff(), l);
      }
    }
    sets.Z.push_back(std::move(Z));
    shrink += w * Gk.rowwise().norm();
    Gk = Gk * agent.A;
  }
  return sets;
}

VectorXd coupling_terms(const AgentModel& agent, const MatrixXd& psi_x, const MatrixXd& psi_u, const VectorXd& x0,
                        const VectorXd& u, int N)
{
  const auto m = agent.m();
  const auto p = psi_x.rows();
  if (x0.size() != agent.n() || u.size() != N * m || psi_x.cols() != agent.n() || psi_u.cols() != m
      || psi_u.rows() != p) {
    throw std::invalid_argument("coupling_terms: dimension mismatch");
  }
  VectorXd f(p * N);
  VectorXd z = x0;
  for (int l = 0; l < N; ++l) {
    const VectorXd ul = u.segment(l * m, m);
    f.segment(l * p, p) = psi_x * z + psi_u * ul;
    z = agent.A * z + agent.B * ul;
  }
  return f;
}

AffineMap coupling_affine(const AgentModel& agent, const MatrixXd& psi_x, const MatrixXd& psi_u, const VectorXd& x0,
                          int N)
{
  const auto m = agent.m();
  const auto p = psi_x.rows();
  const auto pred = Prediction::build(agent.A, agent.B, N);
  AffineMap map{MatrixXd::Zero(p * N, N * m), VectorXd::Zero(p * N)};
  for (int l = 0; l < N; ++l) {
    const auto idx = static_cast<std::size_t>(l);
    map.F.middleRows(l * p, p) = psi_x * pred.Gamma[idx];
    map.F.block(l * p, l * m, p, m) += psi_u;
    map.f0.segment(l * p, p) = psi_x * pred.Phi[idx] * x0;
  }
  return map;
}

VectorXd terminal_coupling_terms(const AgentModel& agent, const MatrixXd& psi_x, const MatrixXd& psi_u,
                                 const MatrixXd& K, const VectorXd& x0, int N)
{
  const auto p = psi_x.rows();
  const MatrixXd psi_n = psi_x + psi_u * K;
  const MatrixXd Acl = agent.A + agent.B * K;
  VectorXd f(p * N);
  VectorXd z = x0;
  for (int l = 0; l < N; ++l) {
    f.segment(l * p, p) = psi_n * z;
    z = Acl * z;
  }
  return f;
}

nlohmann::json to_json(const ToleranceSchedule& s)
{
  std::vector<double> eps(s.eps.data(), s.eps.data() + s.eps.size());
  std::vector<double> b(s.b.data(), s.b.data() + s.b.size());
  return {{"N", s.N}, {"p", s.p}, {"eps", eps}, {"b", b}};
}

nlohmann::json to_json(const TightenedSets& sets)
{
  nlohmann::json steps = nlohmann::json::array();
  for (std::size_t l = 0; l < sets.Z.size(); ++l) {
    const auto& Z = sets.Z[l];
    nlohmann::json G = nlohmann::json::array();
    for (Eigen::Index r = 0; r < Z.G.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < Z.G.cols(); ++c) { row.push_back(Z.G(r, c)); }
      G.push_back(std::move(row));
    }
    steps.push_back({{"l", l}, {"G", G}, {"h", std::vector<double>(Z.h.data(), Z.h.data() + Z.h.size())}});
  }
  return steps;
}

}  // namespace tdmpc
