#pragma once

/**
 * @file
 * @brief Proximal Jacobi consensus ADMM on per-agent copies of the coupling
 * multiplier.
 */

#include "tdmpc/local_solver.hpp"

#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace tdmpc {

class AdmmError : public std::runtime_error
{
public:
  AdmmError(const std::string& what, int agent) : std::runtime_error(what), agent_(agent) {}
  int agent() const noexcept { return agent_; }

private:
  int agent_;
};

struct AdmmParams
{
  double rho = 1.0;
  double gamma = 1.0;
  double tau = 0.0;  ///< <= 0 means auto
  double tol_primal = 1e-5;
  double tol_dual = 1e-5;
  int max_iter = 500;

  /// Throws std::invalid_argument on rho <= 0, gamma outside (0, 1], nonpositive tolerances or max_iter < 1.
  void validate() const;
  static AdmmParams from(const SolverConfig& cfg);
};

/// Chain-difference consensus: rows of block i are lambda^i - lambda^{i+1}, c = 0.
struct ConsensusMap
{
  std::vector<MatrixXd> E;  ///< one block per agent, (M-1) pN x pN
  VectorXd c;

  Eigen::Index rows() const { return c.size(); }
  VectorXd apply(const std::vector<VectorXd>& lambda) const;
};

ConsensusMap consensus_map(std::size_t M, Eigen::Index p, int N);

struct AdmmState
{
  std::vector<VectorXd> lambda;
  VectorXd omega;
  int iteration = 0;
  double primal_residual = 0.0;  ///< ||sum E^i lambda^i - c||
  double dual_residual = 0.0;    ///< max_i ||lambda^i_{k+1} - lambda^i_k||
  double coupling_violation = 0.0;  ///< max(0, max_row(sum f^i - b))
  std::vector<OcpSolution> solutions;

  /// max_{i,j} ||lambda^i - lambda^j||_inf
  double consensus_spread() const;
  double total_cost() const;
};

struct AdmmTraceRow
{
  int iter = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double total_cost = 0.0;
};

struct AdmmResult
{
  AdmmState state;
  bool converged = false;
  std::vector<AdmmTraceRow> trace;
  double tau = 0.0;  ///< proximal weight actually used
};

/// rho sigma_max(E'E) + max_i sigma_max(F_i H_i^{-1} F_i'): majorises the linearised lambda step.
double auto_tau(const ConsensusMap& map, const std::vector<CondensedOcp>& ocps, double rho);

/// Simultaneous clipped proximal step from the snapshot in `state`.
/// `residual[i]` is f^i(u^i) - b/M evaluated at the current inner solution.
std::vector<VectorXd> lambda_update(const AdmmState& state, const ConsensusMap& map,
                                    const std::vector<VectorXd>& residual, double rho, double tau);

/// omega - rho gamma (sum E^i lambda^i - c)
VectorXd omega_update(const VectorXd& omega, const ConsensusMap& map, const std::vector<VectorXd>& lambda,
                      double rho, double gamma);

/// Throws AdmmError when an inner problem is infeasible.
AdmmResult run_admm(const std::vector<CondensedOcp>& ocps, const AdmmParams& params, const QpSettings& qp = {});

void write_admm_trace(std::ostream& os, const std::vector<AdmmTraceRow>& trace);

}  // namespace tdmpc
