#pragma once

/**
 * @file
 * @brief Problem data for disturbed linear multi-agent systems with local
 * polytopic constraints and a globally coupled linear constraint.
 */

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace tdmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Absolute slack used by every membership test.
inline constexpr double kMembershipTol = 1e-9;

/**
 * @brief Raised when a scenario document is structurally valid but violates
 * a modelling assumption. Carries the agent index (-1 for scenario-level
 * fields) and the offending field name.
 */
class ScenarioError : public std::runtime_error
{
public:
  ScenarioError(int agent, std::string field, const std::string& what);

  int agent() const noexcept { return agent_; }
  const std::string& field() const noexcept { return field_; }

private:
  int agent_;
  std::string field_;
};

/// Raised when the document cannot be parsed at all.
class ParseError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Half-space representation {y : G y <= h}.
struct HPolytope
{
  MatrixXd G;
  VectorXd h;

  Eigen::Index dim() const { return G.cols(); }
  Eigen::Index faces() const { return G.rows(); }

  static HPolytope box(const VectorXd& half_widths);

  friend bool operator==(const HPolytope&, const HPolytope&);
};

/// True iff G y <= h + tol component-wise. Throws std::invalid_argument on a
/// dimension mismatch.
bool membership(const HPolytope& poly, const VectorXd& y, double tol = kMembershipTol);

/// Boundedness test: every coordinate direction must lie in the cone spanned
/// by the face normals.
bool is_bounded(const HPolytope& poly);

/// Origin strictly interior, i.e. every offset positive.
bool contains_origin_interior(const HPolytope& poly, double tol = kMembershipTol);

enum class DisturbanceShape { Ball, Box };

/**
 * @brief Disturbance set description.
 *
 * Bounds are always driven by the 2-norm radius `w_bar()`. A box is covered by
 * the ball through its corners.
 */
struct Disturbance
{
  DisturbanceShape shape = DisturbanceShape::Ball;
  double radius = 0.0;    ///< Ball radius (shape == Ball).
  VectorXd half_widths;   ///< Box half widths (shape == Box).

  double w_bar() const;
  bool contains(const VectorXd& w, double tol = kMembershipTol) const;
  Disturbance scaled(double factor) const;

  friend bool operator==(const Disturbance&, const Disturbance&);
};

struct AgentModel
{
  MatrixXd A;
  MatrixXd B;
  Disturbance disturbance;
  HPolytope X;
  HPolytope U;
  MatrixXd Q;
  MatrixXd R;

  Eigen::Index n() const { return A.rows(); }
  Eigen::Index m() const { return B.cols(); }
  double w_bar() const { return disturbance.w_bar(); }

  friend bool operator==(const AgentModel&, const AgentModel&);
};

/**
 * @brief Global coupling  sum_i (Psi_x[i] x_i + Psi_u[i] u_i) <= 1_p.
 *
 * Always stored normalised to an all-ones right-hand side.
 */
struct CouplingSpec
{
  std::vector<MatrixXd> psi_x;
  std::vector<MatrixXd> psi_u;
  Eigen::Index p = 0;

  friend bool operator==(const CouplingSpec&, const CouplingSpec&);
};

/// Divides every row (and its right-hand side entry) by the right-hand side.
/// Requires rhs > 0 entry-wise.
CouplingSpec normalize_coupling(std::vector<MatrixXd> psi_x, std::vector<MatrixXd> psi_u, const VectorXd& rhs);

enum class TriggerMode { SelfTriggered, Periodic };

std::string_view to_string(TriggerMode mode);
std::optional<TriggerMode> parse_trigger_mode(std::string_view s);

/// Distributed-solver settings carried by a scenario.
struct SolverConfig
{
  double rho = 1.0;
  double gamma = 1.0;
  std::optional<double> tau;  ///< auto-computed when empty
  double tol_primal = 1e-5;
  double tol_dual = 1e-5;
  int max_iter = 500;
  int qp_max_iter = 20000;
  double qp_tol = 1e-8;

  bool operator==(const SolverConfig&) const = default;
};

struct Scenario
{
  std::vector<AgentModel> agents;
  CouplingSpec coupling;
  int horizon = 1;
  int steps = 1;
  std::vector<VectorXd> x0;
  std::uint64_t seed = 0;
  SolverConfig solver;
  TriggerMode trigger = TriggerMode::SelfTriggered;

  std::size_t num_agents() const { return agents.size(); }

  friend bool operator==(const Scenario&, const Scenario&);
};

/// Parses and validates a scenario document. Throws ParseError or ScenarioError.
Scenario validate_scenario(const nlohmann::json& doc);
Scenario validate_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);

/// Canonical document of a validated scenario; re-ingesting it yields an equal Scenario.
nlohmann::json to_json(const Scenario& scenario);

/// Re-runs every validation check on an in-memory scenario.
void check_scenario(const Scenario& scenario);

}  // namespace tdmpc
