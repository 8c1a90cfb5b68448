#pragma once

/**
 * @file
 * @brief Offline terminal ingredients (LQ gain, terminal weight, invariant
 * ellipsoid radii) and the disturbance-bound certificates.
 */

#include "tdmpc/model.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace tdmpc {

class SynthesisError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/**
 * @brief Terminal ingredients of one agent.
 *
 * The terminal set is {z : ||z||_P <= eps_r}, nested in the invariant
 * ellipsoid {z : ||z||_P <= r} on which u = K z is admissible.
 */
struct TerminalIngredients
{
  MatrixXd K;                ///< m x n, closed loop A + B K
  MatrixXd P;                ///< n x n terminal weight
  double r = 0.0;
  double eps_r = 0.0;
  double contraction = 0.0;  ///< 1 - lambda_min(Q) / lambda_max(P)
};

/// Stabilising solution S of the discrete algebraic Riccati equation (doubling).
MatrixXd solve_dare(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R);

/// K = -(R + B'SB)^{-1} B'SA. Throws SynthesisError on non-convergence.
MatrixXd lqr_gain(const MatrixXd& A, const MatrixXd& B, const MatrixXd& Q, const MatrixXd& R);

/// Solves (A+BK)' P (A+BK) + Q + K'RK = P. Throws SynthesisError if rho(A+BK) >= 1.
MatrixXd terminal_weight(const MatrixXd& A, const MatrixXd& B, const MatrixXd& K, const MatrixXd& Q,
                         const MatrixXd& R);

struct TerminalRadii
{
  double r = 0.0;
  double eps_r = 0.0;
};

/// Largest P-ellipsoid inside X whose K-image lies in U; eps_r = sqrt(contraction) r.
TerminalRadii terminal_radii(const MatrixXd& P, const MatrixXd& K, double contraction, const HPolytope& X,
                             const HPolytope& U);

/// Runs lqr_gain, terminal_weight and terminal_radii for one agent.
TerminalIngredients synthesize(const AgentModel& agent);

std::vector<TerminalIngredients> synthesize_all(const Scenario& scenario);

/// Residual ||(A+BK)'P(A+BK) + Q + K'RK - P||.
double lyapunov_residual(const AgentModel& agent, const TerminalIngredients& ing);

struct ToleranceSchedule;

struct AgentCertificate
{
  double w_bar = 0.0;
  double a_norm = 0.0;          ///< ||A||_2
  double local_bound = 0.0;     ///< largest w_bar allowed by the local recursive-feasibility condition
  double global_bound = 0.0;    ///< largest w_bar allowed by the coupled-constraint condition
  double invariance_margin = 0.0;  ///< r - eps_r - sqrt(lambda_max(P)) w_bar
  bool local_pass = false;
  bool global_pass = false;
  bool invariance_pass = false;

  double local_margin() const { return local_bound - w_bar; }
  double global_margin() const { return global_bound - w_bar; }
};

struct CertificateReport
{
  std::vector<AgentCertificate> agents;
  /// sum_i ||Psi_N^i|| r^i / sqrt(lambda_max(P^i)) + eps(N) <= 1
  double terminal_coupling_value = 0.0;
  bool terminal_coupling_pass = false;
  /// 0 < eps(1) < ... < eps(N) < 1
  bool schedule_pass = false;
  bool disturbance_free = false;  ///< all w_bar == 0: schedule check vacuous
  std::vector<std::string> notes;

  /// Every agent check, the terminal coupling check, and the schedule check
  /// (unless vacuous) pass.
  bool pass() const;
  /// Names of failed checks, e.g. "agent 0: local".
  std::vector<std::string> failures() const;
};

CertificateReport certify(const Scenario& scenario, const std::vector<TerminalIngredients>& ingredients,
                          const ToleranceSchedule& schedule);

nlohmann::json to_json(const CertificateReport& report);

/// Branch tolerance for ||A|| == 1.
inline constexpr double kUnitNormTol = 1e-9;

/// sum_{j=0}^{count-1} a^j, with the a == 1 branch taken when |a - 1| <= kUnitNormTol.
double geometric_sum(double a, int count);

}  // namespace tdmpc
