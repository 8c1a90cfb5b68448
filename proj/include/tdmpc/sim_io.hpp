#pragma once

#include "tdmpc/simulator.hpp"

#include "json.hpp"

#include <filesystem>
#include <iosfwd>

namespace tdmpc {

/// One row per (t, agent): t, agent, x1..xn, u1..um, w1..wn, coupling_row_1..p, mode. Final states close the file.
void write_trace_csv(std::ostream& os, const Scenario& scenario, const SimLog& log);

/// One row per trigger instant: t_k, Mk, total_cost, admm_iters.
void write_triggers_csv(std::ostream& os, const SimLog& log);

nlohmann::json summary_json(const SimLog& log);
nlohmann::json to_json(const MonteCarloReport& report);

/// Writes trace.csv, triggers.csv and summary.json into `dir`, creating it if needed.
void write_run_outputs(const std::filesystem::path& dir, const Scenario& scenario, const SimLog& log);

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc);

}  // namespace tdmpc
