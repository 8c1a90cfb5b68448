#include "tdmpc/dual_admm.hpp"

#include "tdmpc/linalg.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace tdmpc {

void AdmmParams::validate() const
{
  if (!(rho > 0.0)) { throw std::invalid_argument("ADMM penalty rho must be positive"); }
  if (!(gamma > 0.0 && gamma <= 1.0)) { throw std::invalid_argument("ADMM relaxation gamma must lie in (0, 1]"); }
  if (!(tol_primal > 0.0 && tol_dual > 0.0)) { throw std::invalid_argument("ADMM tolerances must be positive"); }
  if (max_iter < 1) { throw std::invalid_argument("ADMM max_iter must be at least 1"); }
}

AdmmParams AdmmParams::from(const SolverConfig& cfg)
{
  AdmmParams p;
  p.rho = cfg.rho;
  p.gamma = cfg.gamma;
  p.tau = cfg.tau.value_or(0.0);
  p.tol_primal = cfg.tol_primal;
  p.tol_dual = cfg.tol_dual;
  p.max_iter = cfg.max_iter;
  return p;
}

VectorXd ConsensusMap::apply(const std::vector<VectorXd>& lambda) const
{
  VectorXd s = -c;
  for (std::size_t i = 0; i < E.size(); ++i) { s += E[i] * lambda[i]; }
  return s;
}

ConsensusMap consensus_map(std::size_t M, Eigen::Index p, int N)
{
  const Eigen::Index d = p * N;
  const auto links = static_cast<Eigen::Index>(M) - 1;
  ConsensusMap map;
  map.c = VectorXd::Zero(links * d);
  for (std::size_t i = 0; i < M; ++i) {
    MatrixXd Ei = MatrixXd::Zero(links * d, d);
    const auto k = static_cast<Eigen::Index>(i);
    if (k < links) { Ei.middleRows(k * d, d).setIdentity(); }
    if (k >= 1) { Ei.middleRows((k - 1) * d, d) -= MatrixXd::Identity(d, d); }
    map.E.push_back(std::move(Ei));
  }
  return map;
}

double AdmmState::consensus_spread() const
{
  double s = 0.0;
  for (std::size_t i = 0; i < lambda.size(); ++i) {
    for (std::size_t j = i + 1; j < lambda.size(); ++j) {
      s = std::max(s, (lambda[i] - lambda[j]).cwiseAbs().maxCoeff());
    }
  }
  return s;
}

double AdmmState::total_cost() const
{
  double J = 0.0;
  for (const auto& s : solutions) { J += s.cost; }
  return J;
}

double auto_tau(const ConsensusMap& map, const std::vector<CondensedOcp>& ocps, double rho)
{
  double consensus = 0.0;
  if (map.rows() > 0) {
    MatrixXd Es(map.rows(), 0);
    for (const auto& Ei : map.E) {
      MatrixXd next(map.rows(), Es.cols() + Ei.cols());
      next << Es, Ei;
      Es = std::move(next);
    }
    consensus = lambda_max_sym(Es.transpose() * Es);
  }
  double curvature = 0.0;
  for (const auto& o : ocps) {
    const MatrixXd& F = o.coupling.F;
    curvature = std::max(curvature, lambda_max_sym(F * o.H.llt().solve(F.transpose())));
  }
  return std::max(rho * consensus + curvature, 1e-12);
}

std::vector<VectorXd> lambda_update(const AdmmState& state, const ConsensusMap& map,
                                    const std::vector<VectorXd>& residual, double rho, double tau)
{
  const VectorXd r = map.rows() > 0 ? map.apply(state.lambda) : VectorXd();
  std::vector<VectorXd> out;
  out.reserve(state.lambda.size());
  for (std::size_t i = 0; i < state.lambda.size(); ++i) {
    VectorXd step = residual[i];
    if (map.rows() > 0) { step += map.E[i].transpose() * (state.omega - rho * r); }
    out.push_back((state.lambda[i] + step / tau).cwiseMax(0.0));
  }
  return out;
}

VectorXd omega_update(const VectorXd& omega, const ConsensusMap& map, const std::vector<VectorXd>& lambda,
                      double rho, double gamma)
{
  if (map.rows() == 0) { return omega; }
  return omega - rho * gamma * map.apply(lambda);
}

namespace {

void solve_all(const std::vector<CondensedOcp>& ocps, const std::vector<VectorXd>& lambda, const QpSettings& qp,
               std::vector<OcpSolution>& solutions)
{
  for (std::size_t i = 0; i < ocps.size(); ++i) {
    const QpWarmStart* warm = solutions.size() == ocps.size() ? &solutions[i].warm : nullptr;
    OcpSolution s = solve_inner(ocps[i], lambda[i], qp, warm);
    if (s.status == OcpStatus::Infeasible) {
      throw AdmmError("inner problem infeasible for agent " + std::to_string(i), static_cast<int>(i));
    }
    if (solutions.size() == ocps.size()) {
      solutions[i] = std::move(s);
    } else {
      solutions.push_back(std::move(s));
    }
  }
}

}  // namespace

AdmmResult run_admm(const std::vector<CondensedOcp>& ocps, const AdmmParams& params, const QpSettings& qp)
{
  params.validate();
  if (ocps.empty()) { throw std::invalid_argument("run_admm: no agents"); }
  const auto M = ocps.size();
  const auto d = ocps.front().coupling.F.rows();
  const int N = ocps.front().N;
  const auto map = consensus_map(M, N > 0 ? d / N : 0, N);

  AdmmResult res;
  res.tau = params.tau > 0.0 ? params.tau : auto_tau(map, ocps, params.rho);
  auto& st = res.state;
  st.lambda.assign(M, VectorXd::Zero(d));
  st.omega = VectorXd::Zero(map.rows());
  solve_all(ocps, st.lambda, qp, st.solutions);

  VectorXd b = VectorXd::Zero(d);
  for (const auto& o : ocps) { b += o.rhs_share; }

  std::vector<VectorXd> residual(M);
  for (int k = 1; k <= params.max_iter; ++k) {
    for (std::size_t i = 0; i < M; ++i) {
      residual[i] = ocps[i].coupling(st.solutions[i].u) - ocps[i].rhs_share;
    }
    auto next = lambda_update(st, map, residual, params.rho, res.tau);
    double dual = 0.0;
    for (std::size_t i = 0; i < M; ++i) { dual = std::max(dual, (next[i] - st.lambda[i]).norm()); }
    st.lambda = std::move(next);
    solve_all(ocps, st.lambda, qp, st.solutions);
    st.omega = omega_update(st.omega, map, st.lambda, params.rho, params.gamma);

    VectorXd coupled = -b;
    for (std::size_t i = 0; i < M; ++i) { coupled += ocps[i].coupling(st.solutions[i].u); }
    st.iteration = k;
    st.primal_residual = map.rows() > 0 ? map.apply(st.lambda).norm() : 0.0;
    st.dual_residual = dual;
    st.coupling_violation = std::max(0.0, coupled.maxCoeff());
    res.trace.push_back({k, st.primal_residual, st.dual_residual, st.total_cost()});

    if (st.primal_residual <= params.tol_primal && st.dual_residual <= params.tol_dual
        && st.coupling_violation <= params.tol_primal) {
      res.converged = true;
      break;
    }
  }
  spdlog::debug("admm: {} iterations, converged={}, primal={:.3e}, dual={:.3e}, violation={:.3e}", st.iteration,
                res.converged, st.primal_residual, st.dual_residual, st.coupling_violation);
  return res;
}

void write_admm_trace(std::ostream& os, const std::vector<AdmmTraceRow>& trace)
{
  os << "iter,primal_res,dual_res,total_cost\n" << std::setprecision(17);
  for (const auto& r : trace) {
    os << r.iter << ',' << r.primal_residual << ',' << r.dual_residual << ',' << r.total_cost << '\n';
  }
}

}  // namespace tdmpc
