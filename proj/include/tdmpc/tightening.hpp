#pragma once

/**
 * @file
 * @brief Constraint tightening: tolerance schedule for the coupled constraint,
 * tightened local state sets, and the per-agent coupling map.
 */

#include "tdmpc/model.hpp"

#include <stdexcept>
#include <vector>

namespace tdmpc {

struct TerminalIngredients;

class TighteningError : public std::runtime_error
{
public:
  TighteningError(const std::string& what, double value, int step = -1)
      : std::runtime_error(what), value_(value), step_(step)
  {}
  double value() const noexcept { return value_; }
  int step() const noexcept { return step_; }

private:
  double value_;
  int step_;
};

/// Norm used for coupling matrices: largest row 2-norm (spectral norm when p = 1).
double coupling_norm(const MatrixXd& psi);

struct ToleranceSchedule
{
  int N = 0;
  Eigen::Index p = 0;
  VectorXd eps;  ///< eps(l), l = 0..N; eps(N) uses Psi_N = Psi_x + Psi_u K
  VectorXd b;    ///< length p N, block l = (1 - eps(l)) 1_p, l = 0..N-1
};

/// Throws TighteningError when eps(N) >= 1.
ToleranceSchedule tolerance_schedule(const Scenario& scenario, const std::vector<TerminalIngredients>& ingredients);

/// Same values without the eps(N) < 1 check; used for reporting.
ToleranceSchedule tolerance_schedule_unchecked(const Scenario& scenario,
                                               const std::vector<TerminalIngredients>& ingredients);

/// Z[l] = X minus the l-step disturbance reachable set, l = 0..N-1.
struct TightenedSets
{
  std::vector<HPolytope> Z;
};

/// Face offsets h - w_bar sum_{j<l} ||(A^j)' g||. Throws TighteningError if some Z[l] is empty.
TightenedSets tighten_local_sets(const AgentModel& agent, int N);

/// Stacked f = (Psi_x z(l) + Psi_u u(l))_{l=0..N-1}, by forward simulation of the nominal system.
VectorXd coupling_terms(const AgentModel& agent, const MatrixXd& psi_x, const MatrixXd& psi_u, const VectorXd& x0,
                        const VectorXd& u, int N);

/// f(u) = F u + f0
struct AffineMap
{
  MatrixXd F;
  VectorXd f0;

  VectorXd operator()(const VectorXd& u) const { return F * u + f0; }
};

AffineMap coupling_affine(const AgentModel& agent, const MatrixXd& psi_x, const MatrixXd& psi_u, const VectorXd& x0,
                          int N);

/// Coupling contribution over the horizon of an agent running u = K z from x0.
VectorXd terminal_coupling_terms(const AgentModel& agent, const MatrixXd& psi_x, const MatrixXd& psi_u,
                                 const MatrixXd& K, const VectorXd& x0, int N);

nlohmann::json to_json(const ToleranceSchedule& schedule);
nlohmann::json to_json(const TightenedSets& sets);

}  // namespace tdmpc
