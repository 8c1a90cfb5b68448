#include "tdmpc/simulator.hpp"

#include "tdmpc/linalg.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

namespace tdmpc {

namespace {

/// Row tolerance used when auditing the closed loop; matches the OCP feasibility tolerance.
constexpr double kAuditTol = kFeasibilityTol;

double row_excess(const HPolytope& poly, const VectorXd& v)
{
  return poly.faces() == 0 ? -1e300 : (poly.G * v - poly.h).maxCoeff();
}

}  // namespace

OfflineDesign OfflineDesign::build(const Scenario& scenario)
{
  OfflineDesign d;
  d.ingredients = synthesize_all(scenario);
  for (const auto& a : scenario.agents) { d.sets.push_back(tighten_local_sets(a, scenario.horizon)); }
  d.schedule = tolerance_schedule_unchecked(scenario, d.ingredients);
  d.certificate = certify(scenario, d.ingredients, d.schedule);
  return d;
}

VectorXd step_plant(const AgentModel& agent, const VectorXd& x, const VectorXd& u, const VectorXd& w)
{
  if (x.size() != agent.n() || u.size() != agent.m() || w.size() != agent.n()) {
    throw std::invalid_argument("step_plant: dimension mismatch");
  }
  return agent.A * x + agent.B * u + w;
}

DisturbanceSampler::DisturbanceSampler(const std::vector<AgentModel>& agents, std::uint64_t seed, SamplingMode mode)
    : mode_(mode)
{
  for (std::size_t i = 0; i < agents.size(); ++i) {
    sets_.push_back(agents[i].disturbance);
    dims_.push_back(agents[i].n());
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32U),
                      static_cast<std::uint32_t>(i), 0x5eedU};
    streams_.emplace_back(seq);
  }
}

VectorXd DisturbanceSampler::sample(std::size_t agent)
{
  const auto& set = sets_.at(agent);
  auto& rng = streams_[agent];
  std::uniform_real_distribution<double> unit(-1.0, 1.0);

  if (set.shape == DisturbanceShape::Box) {
    const auto n = set.half_widths.size();
    VectorXd w(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double s = mode_ == SamplingMode::Extreme ? (unit(rng) < 0.0 ? -1.0 : 1.0) : unit(rng);
      w(j) = s * set.half_widths(j);
    }
    return w;
  }

  const auto n = dims_[agent];
  std::normal_distribution<double> normal;
  VectorXd dir(n);
  for (Eigen::Index j = 0; j < n; ++j) { dir(j) = normal(rng); }
  const double nrm = dir.norm();
  if (nrm == 0.0 || set.radius == 0.0) { return VectorXd::Zero(n); }
  dir /= nrm;
  if (mode_ == SamplingMode::Extreme) { return set.radius * dir; }
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  return set.radius * std::pow(u01(rng), 1.0 / static_cast<double>(n)) * dir;
}

const char* to_string(SimStatus s)
{
  switch (s) {
    case SimStatus::Ok: return "ok";
    case SimStatus::InitialInfeasible: return "initial-infeasible";
    case SimStatus::RecursiveInfeasible: return "recursive-infeasible";
    case SimStatus::AdmmFailure: return "admm-failure";
    case SimStatus::Refused: return "refused";
  }
  return "unknown";
}

bool SimLog::invariants_ok() const
{
  return status == SimStatus::Ok && counters.local_violations == 0 && counters.coupling_violations == 0
         && counters.non_optimal == 0 && counters.trigger_bound_violations == 0 && counters.iss_violations == 0
         && counters.nominal_decrease_violations == 0;
}

SimLog run_closed_loop(const Scenario& scenario, const SimOptions& options)
{
  return run_closed_loop(scenario, OfflineDesign::build(scenario), options);
}

SimLog run_closed_loop(const Scenario& sc, const OfflineDesign& design, const SimOptions& opt)
{
  SimLog log;
  log.mode = opt.mode.value_or(sc.trigger);
  log.seed = opt.seed.value_or(sc.seed);
  log.forced = opt.force;
  if (!design.certificate.pass() && !opt.force) {
    log.status = SimStatus::Refused;
    log.message = "certificates fail; rerun with force to simulate anyway";
    return log;
  }

  const auto M = sc.num_agents();
  const int N = sc.horizon;
  const int T = sc.steps;
  const auto p = sc.coupling.p;
  const AdmmParams params = opt.admm.value_or(AdmmParams::from(sc.solver));
  const QpSettings qp = qp_settings(sc.solver);

  DisturbanceSampler sampler(sc.agents, log.seed, opt.sampling);

  bool disturbance_free = true;
  for (const auto& a : sc.agents) { disturbance_free = disturbance_free && a.w_bar() == 0.0; }
  const double fallback_level =
      design.schedule.eps(1) > 0.0 ? 0.5 * design.schedule.eps(1) : params.tol_primal;

  std::vector<VectorXd> x = sc.x0;
  std::vector<bool> dual(M, false);
  log.states.push_back(x);

  int t = 0;
  while (t < T) {
    for (std::size_t i = 0; i < M; ++i) {
      if (!dual[i] && weighted_norm(x[i], design.ingredients[i].P) <= design.ingredients[i].eps_r) { dual[i] = true; }
    }
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < M; ++i) {
      if (!dual[i]) { active.push_back(i); }
    }

    int Mk = T - t;
    std::vector<OcpSolution> sols(M);
    if (!active.empty()) {
      VectorXd b_eff = design.schedule.b;
      for (std::size_t i = 0; i < M; ++i) {
        if (dual[i]) {
          b_eff -= terminal_coupling_terms(sc.agents[i], sc.coupling.psi_x[i], sc.coupling.psi_u[i],
                                           design.ingredients[i].K, x[i], N);
        }
      }
      const VectorXd share = b_eff / static_cast<double>(active.size());
      std::vector<CondensedOcp> ocps;
      for (auto i : active) {
        ocps.push_back(condense(sc.agents[i], design.ingredients[i], design.sets[i], sc.coupling.psi_x[i],
                                sc.coupling.psi_u[i], x[i], N, share));
      }

      AdmmResult admm;
      try {
        admm = run_admm(ocps, params, qp);
      } catch (const AdmmError& e) {
        log.status = t == 0 ? SimStatus::InitialInfeasible : SimStatus::RecursiveInfeasible;
        log.message = "t = " + std::to_string(t) + ": OCP infeasible for agent "
                      + std::to_string(active[static_cast<std::size_t>(e.agent())]);
        return log;
      }
      log.counters.admm_iterations += admm.state.iteration;
      if (!admm.converged && admm.state.coupling_violation > fallback_level) {
        log.status = SimStatus::AdmmFailure;
        log.message = "t = " + std::to_string(t) + ": ADMM did not converge (coupling violation "
                      + std::to_string(admm.state.coupling_violation) + ")";
        return log;
      }

      TriggerRecord rec;
      rec.t = t;
      rec.agents = active;
      rec.admm_iters = admm.state.iteration;
      rec.admm_converged = admm.converged;
      std::vector<std::vector<CostBound>> bounds;
      for (std::size_t k = 0; k < active.size(); ++k) {
        const auto i = active[k];
        auto& s = admm.state.solutions[k];
        rec.all_optimal = rec.all_optimal && s.status == OcpStatus::Optimal;
        rec.agent_cost.push_back(s.cost);
        rec.plans.push_back(s.u);
        rec.total_cost += s.cost;
        rec.state_cost += x[i].dot(sc.agents[i].Q * x[i]);
        bounds.push_back(cost_bound_profile(sc.agents[i], s, design.ingredients[i]));
        std::vector<double> g;
        for (const auto& b : bounds.back()) { g.push_back(b.g); }
        rec.g.push_back(std::move(g));
        sols[i] = std::move(s);
      }
      const auto decision = select_Mk(rec.g);
      rec.Mk_i = decision.Mk_i;
      Mk = log.mode == TriggerMode::Periodic ? 1 : decision.Mk;
      Mk = std::min(Mk, T - t);
      rec.Mk = Mk;
      for (const auto& b : bounds) {
        rec.g_sum += b[static_cast<std::size_t>(Mk - 1)].g;
        rec.alpha_hat += b[static_cast<std::size_t>(Mk - 1)].g0;
      }

      if (!log.triggers.empty()) {
        auto& prev = log.triggers.back();
        const double dV = rec.total_cost - prev.total_cost;
        prev.delta_V = dV;
        if (prev.g_sum < 0.0) {
          ++log.counters.trigger_bound_checks;
          if (dV > prev.g_sum + opt.bound_tol) { ++log.counters.trigger_bound_violations; }
        }
        ++log.counters.iss_checks;
        if (dV > prev.alpha_hat - prev.state_cost + opt.bound_tol) { ++log.counters.iss_violations; }
        if (disturbance_free && !(dV < 0.0)) { ++log.counters.nominal_decrease_violations; }
      }

      ++log.counters.solve_instants;
      log.counters.agent_solves += static_cast<int>(active.size());
      if (!rec.all_optimal) { ++log.counters.non_optimal; }
      log.triggers.push_back(std::move(rec));
    }

    for (int s = 0; s < Mk; ++s, ++t) {
      StepRecord step;
      step.t = t;
      step.dual_mode = dual;
      step.coupling = VectorXd::Zero(p);
      std::vector<VectorXd> next(M);
      for (std::size_t i = 0; i < M; ++i) {
        const auto& agent = sc.agents[i];
        const auto m = agent.m();
        const VectorXd u = dual[i] ? VectorXd(design.ingredients[i].K * x[i]) : VectorXd(sols[i].u.segment(s * m, m));
        const VectorXd w = sampler.sample(i);
        step.coupling += sc.coupling.psi_x[i] * x[i] + sc.coupling.psi_u[i] * u;

        const double excess = std::max(row_excess(agent.X, x[i]), row_excess(agent.U, u));
        log.max_local_margin = std::max(log.max_local_margin, excess);
        if (excess > kAuditTol) { ++log.counters.local_violations; }
        log.total_stage_cost += x[i].dot(agent.Q * x[i]) + u.dot(agent.R * u);

        next[i] = step_plant(agent, x[i], u, w);
        step.u.push_back(u);
        step.w.push_back(w);
      }
      const double cmax = p > 0 ? step.coupling.maxCoeff() : -1e300;
      log.max_coupling_value = std::max(log.max_coupling_value, cmax);
      if (cmax > 1.0 + kAuditTol) { ++log.counters.coupling_violations; }
      x = std::move(next);
      log.states.push_back(x);
      log.steps.push_back(std::move(step));
    }
  }

  // Audit the final state as well.
  log.all_terminal_at_end = true;
  for (std::size_t i = 0; i < M; ++i) {
    const double excess = row_excess(sc.agents[i].X, x[i]);
    log.max_local_margin = std::max(log.max_local_margin, excess);
    if (excess > kAuditTol) { ++log.counters.local_violations; }
    const double pn = weighted_norm(x[i], design.ingredients[i].P);
    log.max_final_p_norm = std::max(log.max_final_p_norm, pn);
    log.all_terminal_at_end = log.all_terminal_at_end && pn <= design.ingredients[i].r;
  }
  spdlog::debug("closed loop seed {}: {} solve instants, {} ADMM iterations", log.seed, log.counters.solve_instants,
                log.counters.admm_iterations);
  return log;
}

MonteCarloReport monte_carlo(const Scenario& scenario, const OfflineDesign& design, int runs,
                             const SimOptions& options, unsigned threads)
{
  if (runs < 1) { throw std::invalid_argument("monte_carlo: runs must be at least 1"); }
  const std::uint64_t base = options.seed.value_or(scenario.seed);
  std::vector<SimLog> logs(static_cast<std::size_t>(runs));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < runs; k = next++) {
      SimOptions o = options;
      o.seed = base + static_cast<std::uint64_t>(k);
      logs[static_cast<std::size_t>(k)] = run_closed_loop(scenario, design, o);
    }
  };
  if (threads == 0) { threads = std::max(1U, std::thread::hardware_concurrency()); }
  threads = std::min<unsigned>(threads, static_cast<unsigned>(runs));
  std::vector<std::thread> pool;
  for (unsigned k = 1; k < threads; ++k) { pool.emplace_back(worker); }
  worker();
  for (auto& th : pool) { th.join(); }

  MonteCarloReport rep;
  rep.runs = runs;
  for (const auto& log : logs) {
    ++rep.statuses[to_string(log.status)];
    if (log.status == SimStatus::Ok) { ++rep.completed; }
    rep.local_violations += log.counters.local_violations;
    rep.coupling_violations += log.counters.coupling_violations;
    rep.non_optimal += log.counters.non_optimal;
    if (log.status == SimStatus::Ok && log.counters.non_optimal == 0) { ++rep.recursively_feasible_runs; }
    rep.iss_violations += log.counters.iss_violations;
    rep.trigger_bound_violations += log.counters.trigger_bound_violations;
    rep.solve_instants += log.counters.solve_instants;
    rep.max_final_p_norm = std::max(rep.max_final_p_norm, log.max_final_p_norm);
    for (const auto& tr : log.triggers) { ++rep.interval_histogram[tr.Mk]; }
  }
  return rep;
}

}  // namespace tdmpc
