// Acceptance run: one PASS/FAIL line per criterion on the shipped benchmark,
// followed by supplementary lines on the scaled variant. Exit status is
// nonzero when any criterion fails on the shipped benchmark.

#include "common.hpp"
#include "tdmpc/linalg.hpp"
#include "tdmpc/simulator.hpp"

#include <chrono>
#include <iomanip>
#include <iostream>
#include <sstream>

using namespace tdmpc;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int primary_failures = 0;

void report(const std::string& id, bool primary, bool pass, const std::string& detail)
{
  std::cout << std::left << std::setw(14) << id << (pass ? "PASS" : "FAIL") << "  " << detail << '\n';
  if (primary && !pass) { ++primary_failures; }
}

std::string fmt(double v, int prec = 6)
{
  std::ostringstream os;
  os << std::setprecision(prec) << v;
  return os.str();
}

/// Library-level equivalent of `certify`: certificates plus nonempty tightened sets.
bool certify_ok(const Scenario& sc)
{
  try {
    const auto d = OfflineDesign::build(sc);
    return d.certificate.pass();
  } catch (const TighteningError&) {
    return false;
  } catch (const SynthesisError&) {
    return false;
  }
}

Scenario scale_disturbance(const Scenario& sc, double factor)
{
  Scenario out = sc;
  for (auto& a : out.agents) { a.disturbance = a.disturbance.scaled(factor); }
  return out;
}

std::vector<CondensedOcp> initial_ocps(const Scenario& sc, const OfflineDesign& d)
{
  std::vector<CondensedOcp> ocps;
  const VectorXd share = d.schedule.b / static_cast<double>(sc.num_agents());
  for (std::size_t i = 0; i < sc.num_agents(); ++i) {
    ocps.push_back(condense(sc.agents[i], d.ingredients[i], d.sets[i], sc.coupling.psi_x[i], sc.coupling.psi_u[i],
                            sc.x0[i], sc.horizon, share));
  }
  return ocps;
}

void ac1(const Scenario& sc)
{
  const auto t0 = Clock::now();
  const auto ing = synthesize(sc.agents[0]);
  const double secs = seconds_since(t0);
  MatrixXd K(1, 2), P(2, 2);
  K << -0.7033, -0.0710;
  P << 1.0516, 0.0057, 0.0057, 1.0015;
  const double dk = (ing.K - K).cwiseAbs().maxCoeff();
  const double dp = (ing.P - P).cwiseAbs().maxCoeff();
  report("AC1", true, dk <= 5e-3 && dp <= 1e-3 && secs < 1.0,
         "max|dK| = " + fmt(dk, 3) + " (tol 5e-3), max|dP| = " + fmt(dp, 3) + " (tol 1e-3), " + fmt(secs, 3) + " s");
}

void ac2(const Scenario& sc, const std::string& id, bool primary)
{
  const auto t0 = Clock::now();
  const bool base = certify_ok(sc);
  const bool scaled = certify_ok(scale_disturbance(sc, 100.0));
  const double secs = seconds_since(t0);
  std::string detail = std::string("certify ") + (base ? "passes" : "fails") + ", 100x disturbance "
                       + (scaled ? "passes" : "fails") + ", " + fmt(secs, 3) + " s";
  if (!base) {
    const auto d = OfflineDesign::build(sc);
    const auto& a = d.certificate.agents[0];
    detail += "; local bound " + fmt(a.local_bound, 4) + " < w_bar " + fmt(a.w_bar, 4);
  }
  report(id, primary, base && !scaled && secs < 1.0, detail);
}

struct Campaign
{
  MonteCarloReport rep;
  double secs = 0.0;
};

Campaign campaign(const Scenario& sc, int runs)
{
  const auto d = OfflineDesign::build(sc);
  SimOptions o;
  o.force = true;
  const auto t0 = Clock::now();
  Campaign c{monte_carlo(sc, d, runs, o), 0.0};
  c.secs = seconds_since(t0);
  return c;
}

std::string statuses(const MonteCarloReport& r)
{
  std::string s;
  for (const auto& [k, v] : r.statuses) { s += (s.empty() ? "" : ", ") + k + " x" + std::to_string(v); }
  return s;
}

void ac3_ac4(const Scenario& sc, const std::string& suffix, bool primary)
{
  const auto c = campaign(sc, 100);
  const auto& r = c.rep;
  report("AC3" + suffix, primary, r.completed == r.runs && r.local_violations == 0 && r.coupling_violations == 0,
         std::to_string(r.completed) + "/100 runs completed [" + statuses(r) + "], local violations "
             + std::to_string(r.local_violations) + ", coupling violations " + std::to_string(r.coupling_violations)
             + ", " + fmt(c.secs, 3) + " s");
  report("AC4" + suffix, primary, r.recursively_feasible_runs == r.runs && r.non_optimal == 0,
         std::to_string(r.recursively_feasible_runs) + "/100 runs optimal at every trigger instant, "
             + std::to_string(r.solve_instants) + " solve instants, non-optimal " + std::to_string(r.non_optimal));
}

void ac5(const Scenario& sc, const std::string& id, bool primary, std::optional<AdmmParams> params = {})
{
  const auto t0 = Clock::now();
  const auto d = OfflineDesign::build(sc);
  const auto qp = qp_settings(sc.solver);
  const auto central = solve_centralized(sc, d.ingredients, d.sets, d.schedule, sc.x0, qp);
  if (central.status != OcpStatus::Optimal) {
    report(id, primary, false,
           std::string("centralized problem at t = 0 is ") + to_string(central.status)
               + " (most violated coupling row " + std::to_string(central.most_violated_row) + ")");
    return;
  }
  AdmmResult r;
  try {
    r = run_admm(initial_ocps(sc, d), params.value_or(AdmmParams::from(sc.solver)), qp);
  } catch (const AdmmError& e) {
    report(id, primary, false, std::string("local problem infeasible: ") + e.what());
    return;
  }
  const double secs = seconds_since(t0);
  const double rel = std::abs(r.state.total_cost() - central.total_cost) / std::max(1e-12, std::abs(central.total_cost));
  const double spread = r.state.consensus_spread();
  const double resid = std::max(r.state.coupling_violation, r.state.primal_residual);
  report(id, primary, rel <= 5e-3 && spread <= 1e-4 && resid <= 1e-4 && secs < 30.0,
         "rel cost gap " + fmt(rel, 3) + " (tol 5e-3), spread " + fmt(spread, 3) + ", residual " + fmt(resid, 3)
             + ", " + std::to_string(r.state.iteration) + " iterations, " + fmt(secs, 3) + " s");
}

void ac6(const Scenario& sc)
{
  const auto t0 = Clock::now();
  const int N = sc.horizon;
  const int sequences = 100000;
  DisturbanceSampler sampler(sc.agents, sc.seed, SamplingMode::Extreme);
  long checks = 0, exceed = 0;
  double worst = -1e300;
  std::vector<TerminalIngredients> ing = synthesize_all(sc);
  for (int k = 0; k < sequences; ++k) {
    const auto i = static_cast<std::size_t>(k) % sc.num_agents();
    const auto& ag = sc.agents[i];
    std::vector<VectorXd> w;
    for (int j = 0; j < N; ++j) { w.push_back(sampler.sample(i)); }
    VectorXd e = VectorXd::Zero(ag.n());
    for (int Mk = 1; Mk <= N; ++Mk) {
      e = ag.A * e + w[static_cast<std::size_t>(Mk - 1)];
      VectorXd el = e;
      for (int l = 0; l <= N; ++l) {
        for (const MatrixXd* phi : {&ag.Q, static_cast<const MatrixXd*>(&ing[i].P)}) {
          const double bound = deviation_bound(ag, *phi, l, Mk);
          const double v = weighted_norm(el, *phi) - bound;
          worst = std::max(worst, v);
          ++checks;
          if (v > 1e-12 * std::max(1.0, bound)) { ++exceed; }  // round-off only: corners attain the bound
        }
        el = ag.A * el;
      }
    }
  }
  report("AC6", true, exceed == 0,
         std::to_string(sequences) + " extreme sequences, " + std::to_string(checks) + " checks, "
             + std::to_string(exceed) + " exceedances, largest excess " + fmt(worst, 3) + ", " + fmt(seconds_since(t0), 3)
             + " s");
}

struct TransitionStats
{
  int runs = 0;
  int failed_runs = 0;
  int bound_checks = 0;
  int bound_violations = 0;
  int iss_checks = 0;
  int iss_violations = 0;
};

TransitionStats transitions(const Scenario& sc, int min_checks, int max_runs)
{
  const auto d = OfflineDesign::build(sc);
  TransitionStats s;
  for (int k = 0; k < max_runs && s.bound_checks < min_checks; ++k) {
    SimOptions o;
    o.force = true;
    o.seed = sc.seed + static_cast<std::uint64_t>(k / 2);
    o.sampling = k % 2 == 0 ? SamplingMode::Uniform : SamplingMode::Extreme;
    const auto log = run_closed_loop(sc, d, o);
    ++s.runs;
    if (log.status != SimStatus::Ok) {
      ++s.failed_runs;
      continue;
    }
    s.bound_checks += log.counters.trigger_bound_checks;
    s.bound_violations += log.counters.trigger_bound_violations;
    s.iss_checks += log.counters.iss_checks;
    s.iss_violations += log.counters.iss_violations;
  }
  return s;
}

void ac7(const Scenario& sc, const std::string& id, bool primary)
{
  const auto s = transitions(sc, 1000, 4000);
  report(id, primary, s.bound_checks >= 1000 && s.bound_violations == 0,
         std::to_string(s.bound_checks) + " transitions with g(Mk) < 0 over " + std::to_string(s.runs) + " runs ("
             + std::to_string(s.failed_runs) + " aborted), " + std::to_string(s.bound_violations)
             + " exceed g + 1e-5");
}

void ac8(const Scenario& sc, const std::string& id, bool primary)
{
  const auto d = OfflineDesign::build(sc);
  SimOptions per, st;
  per.force = st.force = true;
  per.mode = TriggerMode::Periodic;
  st.mode = TriggerMode::SelfTriggered;
  const auto a = run_closed_loop(sc, d, per);
  const auto b = run_closed_loop(sc, d, st);
  const bool ok = a.status == SimStatus::Ok && b.status == SimStatus::Ok
                  && b.counters.solve_instants < a.counters.solve_instants;
  const double ratio =
      a.counters.solve_instants > 0 ? static_cast<double>(b.counters.solve_instants) / a.counters.solve_instants : 0.0;
  report(id, primary, ok,
         std::string("periodic ") + to_string(a.status) + " with " + std::to_string(a.counters.solve_instants)
             + " solves, self-triggered " + to_string(b.status) + " with " + std::to_string(b.counters.solve_instants)
             + " solves, ratio " + fmt(ratio, 4));
}

void ac9(const Scenario& sc, const std::string& id, bool primary)
{
  const auto nominal = scale_disturbance(sc, 0.0);
  const auto d0 = OfflineDesign::build(nominal);
  int instants = 0, decreases_checked = 0, non_decreases = 0;
  std::string nominal_status = "ok";
  for (auto mode : {TriggerMode::SelfTriggered, TriggerMode::Periodic}) {
    SimOptions o;
    o.force = true;
    o.mode = mode;
    const auto log = run_closed_loop(nominal, d0, o);
    if (log.status != SimStatus::Ok) { nominal_status = to_string(log.status); }
    instants += static_cast<int>(log.triggers.size());
    decreases_checked += std::max(0, static_cast<int>(log.triggers.size()) - 1);
    non_decreases += log.counters.nominal_decrease_violations;
  }
  const bool nominal_ok = nominal_status == "ok" && non_decreases == 0;
  const auto s = transitions(sc, 1000, 4000);
  const bool iss_ok = s.failed_runs == 0 && s.iss_checks > 0 && s.iss_violations == 0;
  report(id, primary, nominal_ok && iss_ok,
         "w_bar = 0 (both modes): " + nominal_status + ", " + std::to_string(instants) + " trigger instants, "
             + std::to_string(decreases_checked) + " consecutive pairs, " + std::to_string(non_decreases)
             + " non-decreases; w_bar > 0: " + std::to_string(s.iss_checks) + " transitions over "
             + std::to_string(s.runs) + " runs (" + std::to_string(s.failed_runs) + " aborted), "
             + std::to_string(s.iss_violations) + " violations");
}

void ac10(const Scenario& sc)
{
  const auto ing = synthesize_all(sc);
  const auto s = tolerance_schedule_unchecked(sc, ing);
  bool inc = s.eps(1) > 0.0 && s.eps(s.N) < 1.0;
  for (int l = 2; l <= s.N; ++l) { inc = inc && s.eps(l) > s.eps(l - 1); }
  const auto nominal = scale_disturbance(sc, 0.0);
  const auto s0 = tolerance_schedule_unchecked(nominal, ing);
  bool zero = s0.eps.cwiseAbs().maxCoeff() == 0.0;
  for (const auto& a : nominal.agents) {
    for (const auto& Z : tighten_local_sets(a, sc.horizon).Z) { zero = zero && Z == a.X; }
  }
  std::string eps;
  for (int l = 1; l <= s.N; ++l) { eps += (l > 1 ? ", " : "") + fmt(s.eps(l), 5); }
  report("AC10", true, inc && zero,
         "eps(1..N) = [" + eps + "]; zero disturbance gives " + (zero ? "zero schedule and Z = X" : "nonzero tightening"));
}

}  // namespace

int main()
{
  const Scenario exact = load_scenario(testing::scenario_path("four_agent.json"));
  const Scenario variant = load_scenario(testing::scenario_path("four_agent_feasible.json"));

  std::cout << "== shipped benchmark (four_agent.json) ==\n";
  ac1(exact);
  ac2(exact, "AC2", true);
  ac3_ac4(exact, "", true);
  ac5(exact, "AC5", true);
  ac6(exact);
  ac7(exact, "AC7", true);
  ac8(exact, "AC8", true);
  ac9(exact, "AC9", true);
  ac10(exact);

  std::cout << "\n== supplementary: scaled variant (four_agent_feasible.json) ==\n";
  ac2(variant, "AC2[variant]", false);
  ac3_ac4(variant, "[variant]", false);
  ac5(variant, "AC5[variant]", false);
  ac7(variant, "AC7[variant]", false);
  ac8(variant, "AC8[variant]", false);
  ac9(variant, "AC9[variant]", false);

  AdmmParams binding;
  binding.rho = 0.1;
  binding.max_iter = 5000;
  ac5(testing::binding_coupling(false, 2.0), "AC5[budget]", false, binding);
  ac5(testing::binding_coupling(true, 1.5), "AC5[2-sided]", false, binding);

  std::cout << "\n" << primary_failures << " criteria failed on the shipped benchmark\n";
  return primary_failures == 0 ? 0 : 1;
}
