#include "tdmpc/sim_io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace tdmpc {

namespace {

void put_cells(std::ostream& os, const VectorXd* v, Eigen::Index width)
{
  for (Eigen::Index j = 0; j < width; ++j) {
    os << ',';
    if (v != nullptr && j < v->size()) { os << (*v)(j); }
  }
}

std::ofstream open_out(const std::filesystem::path& path)
{
  std::ofstream f(path);
  if (!f) { throw std::runtime_error("cannot write " + path.string()); }
  f.imbue(std::locale::classic());
  return f;
}

}  // namespace

void write_trace_csv(std::ostream& os, const Scenario& sc, const SimLog& log)
{
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  for (const auto& a : sc.agents) {
    n = std::max(n, a.n());
    m = std::max(m, a.m());
  }
  const auto p = sc.coupling.p;
  os << "t,agent";
  for (Eigen::Index j = 1; j <= n; ++j) { os << ",x" << j; }
  for (Eigen::Index j = 1; j <= m; ++j) { os << ",u" << j; }
  for (Eigen::Index j = 1; j <= n; ++j) { os << ",w" << j; }
  for (Eigen::Index j = 1; j <= p; ++j) { os << ",coupling_row_" << j; }
  os << ",mode\n" << std::setprecision(17);

  for (std::size_t k = 0; k < log.states.size(); ++k) {
    const StepRecord* step = k < log.steps.size() ? &log.steps[k] : nullptr;
    for (std::size_t i = 0; i < log.states[k].size(); ++i) {
      os << k << ',' << i;
      put_cells(os, &log.states[k][i], n);
      put_cells(os, step != nullptr ? &step->u[i] : nullptr, m);
      put_cells(os, step != nullptr ? &step->w[i] : nullptr, n);
      put_cells(os, step != nullptr ? &step->coupling : nullptr, p);
      os << ',' << (step == nullptr ? "final" : (step->dual_mode[i] ? "dual" : "ocp")) << '\n';
    }
  }
}

void write_triggers_csv(std::ostream& os, const SimLog& log)
{
  os << "t_k,Mk,total_cost,admm_iters\n" << std::setprecision(17);
  for (const auto& tr : log.triggers) {
    os << tr.t << ',' << tr.Mk << ',' << tr.total_cost << ',' << tr.admm_iters << '\n';
  }
}

nlohmann::json summary_json(const SimLog& log)
{
  const auto& c = log.counters;
  nlohmann::json j;
  j["status"] = to_string(log.status);
  j["message"] = log.message;
  j["forced"] = log.forced;
  if (log.forced) { j["watermark"] = "FORCED RUN: certificates did not all pass"; }
  j["mode"] = std::string(to_string(log.mode));
  j["seed"] = log.seed;
  j["steps"] = log.steps.size();
  j["counters"] = {{"solve_instants", c.solve_instants},
                   {"agent_solves", c.agent_solves},
                   {"admm_iterations", c.admm_iterations},
                   {"local_violations", c.local_violations},
                   {"coupling_violations", c.coupling_violations},
                   {"non_optimal", c.non_optimal},
                   {"trigger_bound_checks", c.trigger_bound_checks},
                   {"trigger_bound_violations", c.trigger_bound_violations},
                   {"iss_checks", c.iss_checks},
                   {"iss_violations", c.iss_violations},
                   {"nominal_decrease_violations", c.nominal_decrease_violations}};
  j["invariants"] = {{"local_constraints", c.local_violations == 0},
                     {"coupling_constraints", c.coupling_violations == 0},
                     {"recursive_feasibility", c.non_optimal == 0 && log.status == SimStatus::Ok},
                     {"trigger_bound", c.trigger_bound_violations == 0},
                     {"iss", c.iss_violations == 0},
                     {"nominal_decrease", c.nominal_decrease_violations == 0}};
  j["invariants_ok"] = log.invariants_ok();
  j["max_local_margin"] = log.steps.empty() ? nlohmann::json(nullptr) : nlohmann::json(log.max_local_margin);
  j["max_coupling_value"] = log.steps.empty() ? nlohmann::json(nullptr) : nlohmann::json(log.max_coupling_value);
  j["total_stage_cost"] = log.total_stage_cost;
  j["all_terminal_at_end"] = log.all_terminal_at_end;
  j["max_final_p_norm"] = log.max_final_p_norm;
  return j;
}

nlohmann::json to_json(const MonteCarloReport& r)
{
  nlohmann::json hist = nlohmann::json::object();
  for (const auto& [k, v] : r.interval_histogram) { hist[std::to_string(k)] = v; }
  nlohmann::json statuses = nlohmann::json::object();
  for (const auto& [k, v] : r.statuses) { statuses[k] = v; }
  return {{"runs", r.runs},
          {"completed", r.completed},
          {"statuses", statuses},
          {"local_violations", r.local_violations},
          {"coupling_violations", r.coupling_violations},
          {"non_optimal", r.non_optimal},
          {"recursively_feasible_runs", r.recursively_feasible_runs},
          {"iss_violations", r.iss_violations},
          {"trigger_bound_violations", r.trigger_bound_violations},
          {"solve_instants", r.solve_instants},
          {"max_final_p_norm", r.max_final_p_norm},
          {"interval_histogram", hist}};
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc)
{
  auto f = open_out(path);
  f << doc.dump(2) << '\n';
}

void write_run_outputs(const std::filesystem::path& dir, const Scenario& sc, const SimLog& log)
{
  std::filesystem::create_directories(dir);
  {
    auto f = open_out(dir / "trace.csv");
    write_trace_csv(f, sc, log);
  }
  {
    auto f = open_out(dir / "triggers.csv");
    write_triggers_csv(f, log);
  }
  write_json_file(dir / "summary.json", summary_json(log));
}

}  // namespace tdmpc
