// Command-line front end: certify, inspect, run, montecarlo, compare.
//
// Exit codes:
//   0  success
//   1  certificate failure or closed-loop invariant violation
//   2  parse or validation error
//   3  initial infeasibility
//   4  distributed solver failure
//   5  refused: certificates fail and --force was not given

#include "tdmpc/log.hpp"
#include "tdmpc/sim_io.hpp"
#include "tdmpc/simulator.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <iostream>

namespace {

using namespace tdmpc;

enum Exit : int { kOk = 0, kFail = 1, kParse = 2, kInitial = 3, kAdmm = 4, kRefused = 5 };

struct Options
{
  std::string scenario;
  std::string out = ".";
  std::optional<std::uint64_t> seed;
  int runs = 100;
  std::optional<std::string> mode;
  std::optional<double> rho;
  std::optional<double> gamma;
  std::optional<double> tol;
  std::optional<int> max_iter;
  bool force = false;
};

Scenario load(const Options& o)
{
  Scenario sc = load_scenario(o.scenario);
  if (o.seed) { sc.seed = *o.seed; }
  if (o.mode) {
    const auto m = parse_trigger_mode(*o.mode);
    if (!m) { throw ParseError("unknown trigger mode '" + *o.mode + "'"); }
    sc.trigger = *m;
  }
  if (o.rho) { sc.solver.rho = *o.rho; }
  if (o.gamma) { sc.solver.gamma = *o.gamma; }
  if (o.tol) { sc.solver.tol_primal = sc.solver.tol_dual = *o.tol; }
  if (o.max_iter) { sc.solver.max_iter = *o.max_iter; }
  AdmmParams::from(sc.solver).validate();
  return sc;
}

int exit_for(const SimLog& log)
{
  switch (log.status) {
    case SimStatus::Ok: return log.invariants_ok() ? kOk : kFail;
    case SimStatus::InitialInfeasible: return kInitial;
    case SimStatus::RecursiveInfeasible: return kFail;
    case SimStatus::AdmmFailure: return kAdmm;
    case SimStatus::Refused: return kRefused;
  }
  return kFail;
}

int cmd_certify(const Options& o)
{
  const Scenario sc = load(o);
  const auto ing = synthesize_all(sc);
  const auto schedule = tolerance_schedule_unchecked(sc, ing);
  const auto rep = certify(sc, ing, schedule);
  auto doc = to_json(rep);
  bool pass = rep.pass();
  for (std::size_t i = 0; i < sc.agents.size(); ++i) {
    try {
      (void)tighten_local_sets(sc.agents[i], sc.horizon);
    } catch (const TighteningError& e) {
      doc["failures"].push_back("agent " + std::to_string(i) + ": tightened state set empty at step "
                                + std::to_string(e.step()));
      pass = false;
    }
  }
  doc["pass"] = pass;
  doc["tolerance_schedule"] = to_json(schedule);
  std::filesystem::create_directories(o.out);
  write_json_file(std::filesystem::path(o.out) / "certificate.json", doc);
  std::cout << (pass ? "certificate: PASS" : "certificate: FAIL") << '\n';
  for (const auto& f : doc["failures"]) { std::cout << "  failed: " << f.get<std::string>() << '\n'; }
  return pass ? kOk : kFail;
}

int cmd_inspect(const Options& o)
{
  const Scenario sc = load(o);
  const auto design = OfflineDesign::build(sc);
  nlohmann::json doc;
  doc["scenario"] = to_json(sc);
  nlohmann::json agents = nlohmann::json::array();
  for (std::size_t i = 0; i < sc.agents.size(); ++i) {
    const auto& g = design.ingredients[i];
    nlohmann::json K = nlohmann::json::array();
    for (Eigen::Index r = 0; r < g.K.rows(); ++r) {
      for (Eigen::Index c = 0; c < g.K.cols(); ++c) { K.push_back(g.K(r, c)); }
    }
    nlohmann::json P = nlohmann::json::array();
    for (Eigen::Index r = 0; r < g.P.rows(); ++r) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < g.P.cols(); ++c) { row.push_back(g.P(r, c)); }
      P.push_back(std::move(row));
    }
    agents.push_back({{"K", K},
                      {"P", P},
                      {"r", g.r},
                      {"eps_r", g.eps_r},
                      {"contraction", g.contraction},
                      {"tightened_sets", to_json(design.sets[i])}});
  }
  doc["agents"] = std::move(agents);
  doc["tolerance_schedule"] = to_json(design.schedule);
  doc["certificate"] = to_json(design.certificate);
  std::cout << doc.dump(2) << '\n';
  return kOk;
}

SimOptions sim_options(const Options& o)
{
  SimOptions so;
  so.force = o.force;
  return so;
}

void report(const SimLog& log)
{
  std::cout << "status: " << to_string(log.status) << (log.forced ? " (forced)" : "") << '\n';
  if (!log.message.empty()) { std::cout << "  " << log.message << '\n'; }
  std::cout << "solve instants: " << log.counters.solve_instants << ", ADMM iterations: "
            << log.counters.admm_iterations << '\n';
}

int cmd_run(const Options& o)
{
  const Scenario sc = load(o);
  const auto design = OfflineDesign::build(sc);
  const auto log = run_closed_loop(sc, design, sim_options(o));
  write_run_outputs(o.out, sc, log);
  report(log);
  return exit_for(log);
}

int cmd_montecarlo(const Options& o)
{
  if (o.runs < 1) { throw ParseError("--runs must be at least 1"); }
  const Scenario sc = load(o);
  const auto design = OfflineDesign::build(sc);
  if (!design.certificate.pass() && !o.force) {
    std::cerr << "certificates fail; rerun with --force\n";
    return kRefused;
  }
  const auto rep = monte_carlo(sc, design, o.runs, sim_options(o));
  auto doc = to_json(rep);
  doc["forced"] = o.force;
  std::filesystem::create_directories(o.out);
  write_json_file(std::filesystem::path(o.out) / "montecarlo.json", doc);
  std::cout << doc.dump(2) << '\n';
  const bool ok = rep.completed == rep.runs && rep.local_violations == 0 && rep.coupling_violations == 0
                  && rep.non_optimal == 0 && rep.iss_violations == 0 && rep.trigger_bound_violations == 0;
  return ok ? kOk : kFail;
}

int cmd_compare(const Options& o)
{
  const Scenario sc = load(o);
  const auto design = OfflineDesign::build(sc);
  nlohmann::json doc;
  int code = kOk;
  int solves[2] = {0, 0};
  const TriggerMode modes[2] = {TriggerMode::Periodic, TriggerMode::SelfTriggered};
  for (int k = 0; k < 2; ++k) {
    auto so = sim_options(o);
    so.mode = modes[k];
    const auto log = run_closed_loop(sc, design, so);
    const std::string name(to_string(modes[k]));
    write_run_outputs(std::filesystem::path(o.out) / name, sc, log);
    solves[k] = log.counters.solve_instants;
    doc[name] = {{"status", to_string(log.status)},
                 {"solve_instants", log.counters.solve_instants},
                 {"admm_iterations", log.counters.admm_iterations},
                 {"total_stage_cost", log.total_stage_cost},
                 {"max_local_margin", log.max_local_margin},
                 {"max_coupling_value", log.max_coupling_value}};
    code = std::max(code, exit_for(log));
  }
  doc["solve_ratio"] = solves[0] > 0 ? static_cast<double>(solves[1]) / solves[0] : 0.0;
  doc["forced"] = o.force;
  write_json_file(std::filesystem::path(o.out) / "compare.json", doc);
  std::cout << doc.dump(2) << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv)
{
  tdmpc::configure_logging();
  CLI::App app{"Robust self-triggered distributed MPC for disturbed linear multi-agent systems"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--scenario", o.scenario, "Scenario document (JSON)")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "RNG seed override");
    sub->add_option("--mode", o.mode, "Trigger mode override")
        ->check(CLI::IsMember({"self-triggered", "periodic"}));
    sub->add_option("--rho", o.rho, "ADMM penalty")->check(CLI::PositiveNumber);
    sub->add_option("--gamma", o.gamma, "ADMM relaxation in (0, 1]");
    sub->add_option("--tol", o.tol, "ADMM primal and dual tolerance")->check(CLI::PositiveNumber);
    sub->add_option("--max-iter", o.max_iter, "ADMM iteration cap")->check(CLI::PositiveNumber);
    sub->add_flag("--force", o.force, "Simulate even when certificates fail (outputs are watermarked)");
  };

  std::function<int()> action;
  auto* certify = app.add_subcommand("certify", "Check the recursive-feasibility certificates");
  add_common(certify);
  certify->callback([&] { action = [&] { return cmd_certify(o); }; });
  auto* inspect = app.add_subcommand("inspect", "Print terminal ingredients, tightened sets and schedule");
  add_common(inspect);
  inspect->callback([&] { action = [&] { return cmd_inspect(o); }; });
  auto* run = app.add_subcommand("run", "Simulate one closed-loop run");
  add_common(run);
  run->callback([&] { action = [&] { return cmd_run(o); }; });
  auto* mc = app.add_subcommand("montecarlo", "Closed-loop runs over consecutive seeds");
  add_common(mc);
  mc->add_option("--runs", o.runs, "Number of runs");
  mc->callback([&] { action = [&] { return cmd_montecarlo(o); }; });
  auto* cmp = app.add_subcommand("compare", "Periodic versus self-triggered on identical seeds");
  add_common(cmp);
  cmp->callback([&] { action = [&] { return cmd_compare(o); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kParse;
  }

  try {
    return action();
  } catch (const tdmpc::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return kParse;
  } catch (const tdmpc::ScenarioError& e) {
    std::cerr << "invalid scenario: " << e.what() << '\n';
    return kParse;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid argument: " << e.what() << '\n';
    return kParse;
  } catch (const tdmpc::SynthesisError& e) {
    std::cerr << "synthesis failed: " << e.what() << '\n';
    return kFail;
  } catch (const tdmpc::TighteningError& e) {
    std::cerr << "tightening failed: " << e.what() << '\n';
    return kFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFail;
  }
}
