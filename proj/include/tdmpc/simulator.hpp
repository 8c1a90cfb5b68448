#pragma once

/**
 * @file
 * @brief Closed-loop execution of the self-triggered distributed controller
 * under sampled disturbances, and Monte-Carlo campaigns over seeds.
 */

#include "tdmpc/dual_admm.hpp"
#include "tdmpc/synthesis.hpp"
#include "tdmpc/tightening.hpp"
#include "tdmpc/trigger.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tdmpc {

/// Everything computed offline from a scenario.
struct OfflineDesign
{
  std::vector<TerminalIngredients> ingredients;
  std::vector<TightenedSets> sets;
  ToleranceSchedule schedule;
  CertificateReport certificate;

  /// Throws SynthesisError or TighteningError when the data admit no design at all.
  static OfflineDesign build(const Scenario& scenario);
};

VectorXd step_plant(const AgentModel& agent, const VectorXd& x, const VectorXd& u, const VectorXd& w);

enum class SamplingMode { Uniform, Extreme };

/// Independent reproducible streams per agent. Extreme mode draws box corners or sphere points.
class DisturbanceSampler
{
public:
  DisturbanceSampler(const std::vector<AgentModel>& agents, std::uint64_t seed,
                     SamplingMode mode = SamplingMode::Uniform);

  VectorXd sample(std::size_t agent);
  std::size_t size() const { return sets_.size(); }

private:
  std::vector<Disturbance> sets_;
  std::vector<Eigen::Index> dims_;
  std::vector<std::mt19937_64> streams_;
  SamplingMode mode_;
};

enum class SimStatus { Ok, InitialInfeasible, RecursiveInfeasible, AdmmFailure, Refused };

const char* to_string(SimStatus s);

struct SimOptions
{
  std::optional<TriggerMode> mode;  ///< overrides the scenario
  std::optional<std::uint64_t> seed;
  std::optional<AdmmParams> admm;
  SamplingMode sampling = SamplingMode::Uniform;
  bool force = false;
  /// Tolerance on the logged cost-decrease and ISS inequalities.
  double bound_tol = 1e-5;
};

struct StepRecord
{
  int t = 0;
  std::vector<VectorXd> u;
  std::vector<VectorXd> w;
  VectorXd coupling;           ///< sum_i Psi_x x + Psi_u u, normalised (bound 1)
  std::vector<bool> dual_mode;
};

struct TriggerRecord
{
  int t = 0;
  int Mk = 1;
  std::vector<int> Mk_i;           ///< per OCP agent
  std::vector<std::size_t> agents;  ///< indices of agents solving an OCP
  std::vector<double> agent_cost;
  std::vector<VectorXd> plans;      ///< stacked optimal input sequence per OCP agent
  double total_cost = 0.0;         ///< V = sum of OCP costs
  int admm_iters = 0;
  bool admm_converged = false;
  bool all_optimal = true;
  double g_sum = 0.0;       ///< sum_i g^i(Mk)
  double alpha_hat = 0.0;   ///< sum_i g0^i(Mk)
  double state_cost = 0.0;  ///< sum_i ||x^i(t_k)||_Q^2 over OCP agents
  std::vector<std::vector<double>> g;
  /// Filled at the next trigger instant.
  std::optional<double> delta_V;
};

struct SimCounters
{
  int solve_instants = 0;
  int agent_solves = 0;
  int admm_iterations = 0;
  int local_violations = 0;
  int coupling_violations = 0;
  int non_optimal = 0;
  int trigger_bound_checks = 0;
  int trigger_bound_violations = 0;
  int iss_checks = 0;
  int iss_violations = 0;
  int nominal_decrease_violations = 0;
};

struct SimLog
{
  SimStatus status = SimStatus::Ok;
  std::string message;
  bool forced = false;
  TriggerMode mode = TriggerMode::SelfTriggered;
  std::uint64_t seed = 0;
  std::vector<std::vector<VectorXd>> states;  ///< T+1 entries (fewer on abort)
  std::vector<StepRecord> steps;
  std::vector<TriggerRecord> triggers;
  SimCounters counters;
  double max_local_margin = -1e300;  ///< max over t, i of the worst X/U row excess (<= 0 means satisfied)
  double max_coupling_value = -1e300;
  double total_stage_cost = 0.0;
  bool all_terminal_at_end = false;
  double max_final_p_norm = 0.0;

  bool invariants_ok() const;
};

SimLog run_closed_loop(const Scenario& scenario, const OfflineDesign& design, const SimOptions& options = {});
SimLog run_closed_loop(const Scenario& scenario, const SimOptions& options = {});

struct MonteCarloReport
{
  int runs = 0;
  int completed = 0;
  int local_violations = 0;
  int coupling_violations = 0;
  int non_optimal = 0;
  int recursively_feasible_runs = 0;
  int iss_violations = 0;
  int trigger_bound_violations = 0;
  int solve_instants = 0;
  double max_final_p_norm = 0.0;
  std::map<int, int> interval_histogram;
  std::map<std::string, int> statuses;
};

/// Runs seeds seed, seed+1, ... on up to `threads` workers (0 = hardware concurrency).
MonteCarloReport monte_carlo(const Scenario& scenario, const OfflineDesign& design, int runs,
                             const SimOptions& options = {}, unsigned threads = 0);

}  // namespace tdmpc
