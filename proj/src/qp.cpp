#include "tdmpc/qp.hpp"

#include <algorithm>
#include <cmath>

namespace tdmpc {

namespace {

double inf_norm(const VectorXd& v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

MatrixXd stacked_rows(const ConicQp& qp)
{
  MatrixXd A(qp.num_rows(), qp.num_vars());
  Eigen::Index row = qp.C.rows();
  if (row > 0) { A.topRows(row) = qp.C; }
  for (const auto& b : qp.balls) {
    A.middleRows(row, b.S.rows()) = b.S;
    row += b.S.rows();
  }
  return A;
}

/// Projection onto the product set {v_lin <= d} x balls.
void project(const ConicQp& qp, VectorXd& v)
{
  const auto nl = qp.C.rows();
  if (nl > 0) { v.head(nl) = v.head(nl).cwiseMin(qp.d); }
  Eigen::Index row = nl;
  for (const auto& b : qp.balls) {
    const auto k = b.S.rows();
    v.segment(row, k) = project_ball(v.segment(row, k) + b.c, b.radius) - b.c;
    row += k;
  }
}

/// Support function of the constraint set at y, after restricting y to the
/// polar of its recession cone (y_lin >= 0).
double support(const ConicQp& qp, const VectorXd& y)
{
  const auto nl = qp.C.rows();
  double s = nl > 0 ? qp.d.dot(y.head(nl)) : 0.0;
  Eigen::Index row = nl;
  for (const auto& b : qp.balls) {
    const auto k = b.S.rows();
    const VectorXd yb = y.segment(row, k);
    s += -b.c.dot(yb) + b.radius * yb.norm();
    row += k;
  }
  return s;
}

}  // namespace

Eigen::Index ConicQp::num_rows() const
{
  Eigen::Index rows = C.rows();
  for (const auto& b : balls) { rows += b.S.rows(); }
  return rows;
}

double ConicQp::max_violation(const VectorXd& x) const
{
  double v = 0.0;
  if (C.rows() > 0) { v = std::max(v, (C * x - d).maxCoeff()); }
  for (const auto& b : balls) { v = std::max(v, (b.S * x + b.c).norm() - b.radius); }
  return v;
}

const char* to_string(QpStatus s)
{
  switch (s) {
    case QpStatus::Solved: return "solved";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::IterationCap: return "iteration-cap";
  }
  return "unknown";
}

VectorXd project_ball(const VectorXd& s, double radius)
{
  const double nrm = s.norm();
  if (nrm <= radius) { return s; }
  return (radius / nrm) * s;
}

QpResult solve_qp(const ConicQp& qp, const QpSettings& st, const QpWarmStart* warm)
{
  const auto n = qp.num_vars();
  const MatrixXd A = stacked_rows(qp);
  const auto m = A.rows();
  const MatrixXd At = A.transpose();
  const MatrixXd AtA = At * A;

  QpResult res;
  VectorXd x = VectorXd::Zero(n);
  VectorXd z = VectorXd::Zero(m);
  VectorXd y = VectorXd::Zero(m);
  if (warm != nullptr && warm->x.size() == n) {
    x = warm->x;
    if (warm->z.size() == m && warm->y.size() == m) {
      z = warm->z;
      y = warm->y;
    } else {
      z = A * x;
      project(qp, z);
    }
  }

  double rho = st.rho;
  auto factor = [&](double r) {
    return Eigen::LLT<MatrixXd>(qp.H + st.sigma * MatrixXd::Identity(n, n) + r * AtA);
  };
  Eigen::LLT<MatrixXd> kkt = factor(rho);

  int stagnant = 0;
  double y_norm_at_stagnation_start = 0.0;

  for (int k = 1; k <= st.max_iter; ++k) {
    const VectorXd x_tilde = kkt.solve(st.sigma * x - qp.q + At * (rho * z - y));
    const VectorXd z_tilde = A * x_tilde;
    x = st.alpha * x_tilde + (1.0 - st.alpha) * x;
    const VectorXd v = st.alpha * z_tilde + (1.0 - st.alpha) * z;
    VectorXd z_next = v + y / rho;
    project(qp, z_next);
    const VectorXd dy = rho * (v - z_next);
    y += dy;
    z = std::move(z_next);

    if (k % st.check_interval != 0 && k != st.max_iter) { continue; }

    const VectorXd Ax = A * x;
    const VectorXd Hx = qp.H * x;
    const VectorXd Aty = At * y;
    const double rp = m > 0 ? inf_norm(Ax - z) : 0.0;
    const double rd = inf_norm(Hx + qp.q + Aty);
    const double tol_p = st.eps_abs + st.eps_rel * std::max(inf_norm(Ax), inf_norm(z));
    const double tol_d = st.eps_abs + st.eps_rel * std::max({inf_norm(Hx), inf_norm(Aty), inf_norm(qp.q)});
    res.iterations = k;
    res.primal_residual = rp;
    res.dual_residual = rd;

    if (rp <= tol_p && rd <= tol_d) {
      res.status = QpStatus::Solved;
      break;
    }

    // Primal infeasibility certificate from the dual increment.
    if (m > 0) {
      VectorXd dyc = dy;
      const auto nl = qp.C.rows();
      if (nl > 0) { dyc.head(nl) = dyc.head(nl).cwiseMax(0.0); }
      const double dy_norm = inf_norm(dyc);
      if (dy_norm > 1e-14 && inf_norm(At * dyc) <= st.eps_infeasible * dy_norm
          && support(qp, dyc) <= -st.eps_infeasible * dy_norm) {
        res.status = QpStatus::Infeasible;
        break;
      }
    }

    if (rp > st.stagnation_level) {
      if (stagnant == 0) { y_norm_at_stagnation_start = y.norm(); }
      stagnant += st.check_interval;
      if (stagnant >= st.stagnation_window) {
        if (y.norm() > y_norm_at_stagnation_start) {
          res.status = QpStatus::Infeasible;
          break;
        }
        stagnant = 0;
      }
    } else {
      stagnant = 0;
    }

    if (st.adaptive_rho && m > 0 && k % (10 * st.check_interval) == 0) {
      const double scaled_p = rp / std::max(std::max(inf_norm(Ax), inf_norm(z)), 1e-12);
      const double scaled_d = rd / std::max({inf_norm(Hx), inf_norm(Aty), inf_norm(qp.q), 1e-12});
      if (scaled_d > 0.0) {
        const double rho_new = std::clamp(rho * std::sqrt(scaled_p / scaled_d), 1e-6, 1e6);
        if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
          rho = rho_new;
          kkt = factor(rho);
        }
      }
    }
  }

  res.x = x;
  res.z = z;
  res.y = y;
  res.objective = qp.objective(x);
  return res;
}

}  // namespace tdmpc
