#include "tdmpc/synthesis.hpp"

#include "tdmpc/linalg.hpp"
#include "tdmpc/tightening.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace tdmpc {

double geometric_sum(double a, int count)
{
  if (std::abs(a - 1.0) <= kUnitNormTol) { return static_cast<double>(count); }
  return (1.0 - std::pow(a, count)) / (1.0 - a);
}

MatrixXd solve_dare(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R)
{
  const auto n = A.rows();
  const MatrixXd I = MatrixXd::Identity(n, n);

  // Structure-preserving doubling: H_k converges quadratically to the stabilising solution.
  MatrixXd Ak = A;
  MatrixXd Gk = B * R.llt().solve(B.transpose());
  MatrixXd Hk = Q;
  constexpr int kMaxIter = 100;
  for (int it = 0; it < kMaxIter; ++it) {
    const Eigen::PartialPivLU<MatrixXd> W(I + Gk * Hk);
    const MatrixXd WA = W.solve(Ak);
    const MatrixXd WG = W.solve(Gk);
    const MatrixXd H_next = Hk + Ak.transpose() * Hk * WA;
    const MatrixXd G_next = Gk + Ak * WG * Ak.transpose();
    const MatrixXd A_next = Ak * WA;
    const double change = (H_next - Hk).norm();
    Hk = 0.5 * (H_next + H_next.transpose());
    Gk = 0.5 * (G_next + G_next.transpose());
    Ak = A_next;
    if (!Hk.allFinite()) { break; }
    if (change <= 1e-12 * Hk.norm()) {
      const MatrixXd BtS = B.transpose() * Hk;
      const MatrixXd residual = A.transpose() * Hk * A - Hk + Q
                                - A.transpose() * BtS.transpose() * (R + BtS * B).ldlt().solve(BtS * A);
      if (residual.norm() <= 1e-9 * std::max(1.0, Hk.norm())) { return Hk; }
    }
  }
  throw SynthesisError("Riccati iteration did not converge (non-stabilisable or ill-conditioned data)");
}

MatrixXd lqr_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R)
{
  const MatrixXd S = solve_dare(A, B, Q, R);
  const MatrixXd BtS = B.transpose() * S;
  MatrixXd K = -(R + BtS * B).ldlt().solve(BtS * A);
  if (spectral_radius(A + B * K) >= 1.0) {
    throw SynthesisError("LQ gain does not stabilise the nominal system");
  }
  return K;
}

MatrixXd terminal_weight(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, const MatrixXd& Q,
                         const MatrixXd& R)
{
  const MatrixXd Acl = A + B * K;
  if (spectral_radius(Acl) >= 1.0) {
    throw SynthesisError("Lyapunov series diverges: spectral radius of A+BK >= 1");
  }
  const MatrixXd Qe = Q + K.transpose() * R * K;

  // P = sum_k (Acl')^k Qe Acl^k, summed by repeated squaring.
  MatrixXd P = Qe;
  MatrixXd Ak = Acl;
  for (int it = 0; it < 64; ++it) {
    const MatrixXd term = Ak.transpose() * P * Ak;
    P += term;
    Ak = Ak * Ak;
    if (term.norm() <= 1e-17 * P.norm() || Ak.norm() == 0.0) { break; }
  }
  P = 0.5 * (P + P.transpose());
  const double residual = (Acl.transpose() * P * Acl + Qe - P).norm();
  if (!(residual <= 1e-10 * std::max(1.0, P.norm()))) {
    throw SynthesisError("Lyapunov iteration did not converge");
  }
  return P;
}

TerminalRadii terminal_radii(const MatrixXd& P, const MatrixXd& K, double contraction, const HPolytope& X,
                             const HPolytope& U)
{
  const Eigen::LLT<MatrixXd> llt(P);
  double r = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < X.faces(); ++j) {
    const VectorXd g = X.G.row(j).transpose();
    r = std::min(r, X.h(j) / std::sqrt(g.dot(llt.solve(g))));
  }
  for (Eigen::Index j = 0; j < U.faces(); ++j) {
    const VectorXd g = K.transpose() * U.G.row(j).transpose();
    if (g.norm() == 0.0) { continue; }
    r = std::min(r, U.h(j) / std::sqrt(g.dot(llt.solve(g))));
  }
  if (!(r > 0.0) || !std::isfinite(r)) {
    throw SynthesisError("terminal radius is not positive: origin not interior to the constraint sets");
  }
  return {r, std::sqrt(contraction) * r};
}

TerminalIngredients synthesize(const AgentModel& agent)
{
  TerminalIngredients ing;
  ing.K = lqr_gain(agent.A, agent.B, agent.Q, agent.R);
  ing.P = terminal_weight(agent.A, agent.B, ing.K, agent.Q, agent.R);
  ing.contraction = 1.0 - lambda_min_sym(agent.Q) / lambda_max_sym(ing.P);
  const auto radii = terminal_radii(ing.P, ing.K, ing.contraction, agent.X, agent.U);
  ing.r = radii.r;
  ing.eps_r = radii.eps_r;
  return ing;
}

std::vector<TerminalIngredients> synthesize_all(const Scenario& scenario)
{
  std::vector<TerminalIngredients> out;
  out.reserve(scenario.agents.size());
  for (const auto& a : scenario.agents) { out.push_back(synthesize(a)); }
  return out;
}

double lyapunov_residual(const AgentModel& agent, const TerminalIngredients& ing)
{
  const MatrixXd Acl = agent.A + agent.B * ing.K;
  return (Acl.transpose() * ing.P * Acl + agent.Q + ing.K.transpose() * agent.R * ing.K - ing.P).norm();
}

bool CertificateReport::pass() const
{
  for (const auto& a : agents) {
    if (!(a.local_pass && a.global_pass && a.invariance_pass)) { return false; }
  }
  return terminal_coupling_pass && (schedule_pass || disturbance_free);
}

std::vector<std::string> CertificateReport::failures() const
{
  std::vector<std::string> out;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto prefix = "agent " + std::to_string(i) + ": ";
    if (!agents[i].local_pass) { out.push_back(prefix + "local recursive-feasibility bound"); }
    if (!agents[i].global_pass) { out.push_back(prefix + "global coupled-constraint bound"); }
    if (!agents[i].invariance_pass) { out.push_back(prefix + "terminal invariance margin"); }
  }
  if (!terminal_coupling_pass) { out.emplace_back("terminal coupling certificate"); }
  if (!schedule_pass && !disturbance_free) { out.emplace_back("tolerance schedule monotonicity"); }
  return out;
}

CertificateReport certify(const Scenario& scenario, const std::vector<TerminalIngredients>& ingredients,
                          const ToleranceSchedule& schedule)
{
  CertificateReport rep;
  const int N = scenario.horizon;
  const double M = static_cast<double>(scenario.num_agents());
  bool all_zero = true;
  double terminal_sum = 0.0;

  for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
    const auto& agent = scenario.agents[i];
    const auto& ing = ingredients[i];
    AgentCertificate c;
    c.w_bar = agent.w_bar();
    c.a_norm = spectral_norm(agent.A);
    all_zero = all_zero && c.w_bar == 0.0;

    const double sqrt_lmax = std::sqrt(lambda_max_sym(ing.P));
    const double growth = geometric_sum(c.a_norm, N);
    const double psi_n = coupling_norm(scenario.coupling.psi_x[i] + scenario.coupling.psi_u[i] * ing.K);

    c.local_bound = (ing.r - ing.eps_r) / (sqrt_lmax * growth);
    c.global_bound = psi_n > 0.0 ? (1.0 / (M * psi_n) - ing.r / sqrt_lmax) / growth
                                 : std::numeric_limits<double>::infinity();
    c.invariance_margin = ing.r - ing.eps_r - sqrt_lmax * c.w_bar;
    c.local_pass = c.w_bar <= c.local_bound;
    c.global_pass = c.w_bar <= c.global_bound;
    c.invariance_pass = c.invariance_margin >= 0.0;
    rep.agents.push_back(c);

    terminal_sum += psi_n * ing.r / sqrt_lmax;
  }

  rep.terminal_coupling_value = terminal_sum + schedule.eps(N);
  rep.terminal_coupling_pass = rep.terminal_coupling_value <= 1.0;

  bool monotone = schedule.eps(1) > 0.0 && schedule.eps(N) < 1.0;
  for (int l = 1; l < N; ++l) { monotone = monotone && schedule.eps(l) < schedule.eps(l + 1); }
  rep.schedule_pass = monotone;
  rep.disturbance_free = all_zero;
  if (all_zero) { rep.notes.emplace_back("disturbance-free: schedule check vacuous"); }
  return rep;
}

nlohmann::json to_json(const CertificateReport& rep)
{
  nlohmann::json j;
  j["pass"] = rep.pass();
  nlohmann::json agents = nlohmann::json::array();
  for (const auto& a : rep.agents) {
    agents.push_back({{"w_bar", a.w_bar},
                      {"A_norm", a.a_norm},
                      {"local_bound", a.local_bound},
                      {"local_margin", a.local_margin()},
                      {"local_pass", a.local_pass},
                      {"global_bound", a.global_bound},
                      {"global_margin", a.global_margin()},
                      {"global_pass", a.global_pass},
                      {"invariance_margin", a.invariance_margin},
                      {"invariance_pass", a.invariance_pass}});
  }
  j["agents"] = std::move(agents);
  j["terminal_coupling_value"] = rep.terminal_coupling_value;
  j["terminal_coupling_pass"] = rep.terminal_coupling_pass;
  j["schedule_pass"] = rep.schedule_pass;
  j["disturbance_free"] = rep.disturbance_free;
  j["failures"] = rep.failures();
  j["notes"] = rep.notes;
  return j;
}

}  // namespace tdmpc
