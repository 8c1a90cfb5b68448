#pragma once

/**
 * @file
 * @brief Dense operator-splitting solver for convex QPs whose constraints are
 * half-spaces and Euclidean balls.
 *
 *   min  1/2 x'Hx + q'x
 *   s.t. C x <= d
 *        ||S_b x + c_b|| <= radius_b   for every ball block b
 *
 * Every constraint block is handled through its exact projection: half-spaces
 * by clipping, balls by radial scaling.
 */

#include <Eigen/Dense>

#include <vector>

namespace tdmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct BallConstraint
{
  MatrixXd S;
  VectorXd c;
  double radius = 0.0;
};

struct ConicQp
{
  MatrixXd H;
  VectorXd q;
  MatrixXd C;
  VectorXd d;
  std::vector<BallConstraint> balls;

  Eigen::Index num_vars() const { return H.rows(); }
  /// Linear rows followed by the rows of every ball block.
  Eigen::Index num_rows() const;
  double objective(const VectorXd& x) const { return 0.5 * x.dot(H * x) + q.dot(x); }
  /// Largest constraint violation at x (0 when feasible).
  double max_violation(const VectorXd& x) const;
};

enum class QpStatus { Solved, Infeasible, IterationCap };

const char* to_string(QpStatus s);

struct QpSettings
{
  double eps_abs = 1e-8;
  double eps_rel = 1e-9;
  double eps_infeasible = 1e-7;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  int max_iter = 20000;
  int check_interval = 5;
  bool adaptive_rho = true;
  /// Infeasibility fallback: primal residual above `stagnation_level` for
  /// `stagnation_window` consecutive iterations while the duals keep growing.
  int stagnation_window = 2000;
  double stagnation_level = 1e-3;
};

struct QpWarmStart
{
  VectorXd x;
  VectorXd z;
  VectorXd y;
};

struct QpResult
{
  VectorXd x;
  VectorXd z;
  VectorXd y;
  QpStatus status = QpStatus::IterationCap;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;

  QpWarmStart warm() const { return {x, z, y}; }
};

/// Projection of s onto {v : ||v|| <= radius}.
VectorXd project_ball(const VectorXd& s, double radius);

QpResult solve_qp(const ConicQp& qp, const QpSettings& settings = {}, const QpWarmStart* warm = nullptr);

}  // namespace tdmpc
