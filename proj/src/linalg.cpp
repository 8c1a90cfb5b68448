#include "tdmpc/linalg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <vector>

namespace tdmpc {

double spectral_norm(const MatrixXd& M)
{
  if (M.size() == 0) { return 0.0; }
  Eigen::JacobiSVD<MatrixXd> svd(M);
  return svd.singularValues()(0);
}

double max_row_norm(const MatrixXd& M)
{
  if (M.size() == 0) { return 0.0; }
  return M.rowwise().norm().maxCoeff();
}

double lambda_max_sym(const MatrixXd& S)
{
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

double lambda_min_sym(const MatrixXd& S)
{
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(S, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double spectral_radius(const MatrixXd& M)
{
  Eigen::EigenSolver<MatrixXd> es(M, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_positive_definite(const MatrixXd& S, double tol)
{
  if (S.rows() != S.cols() || S.rows() == 0) { return false; }
  if (!S.isApprox(S.transpose(), 1e-12) && (S - S.transpose()).norm() > 1e-12) { return false; }
  return lambda_min_sym(S) > tol;
}

MatrixXd controllability_matrix(const MatrixXd& A, const MatrixXd& B)
{
  const auto n = A.rows();
  const auto m = B.cols();
  MatrixXd C(n, n * m);
  MatrixXd block = B;
  for (Eigen::Index k = 0; k < n; ++k) {
    C.middleCols(k * m, m) = block;
    block = A * block;
  }
  return C;
}

bool is_reachable(const MatrixXd& A, const MatrixXd& B, double ratio)
{
  const MatrixXd C = controllability_matrix(A, B);
  Eigen::JacobiSVD<MatrixXd> svd(C);
  const VectorXd& s = svd.singularValues();
  if (s.size() < A.rows() || s(0) <= 0.0) { return false; }
  return s(A.rows() - 1) / s(0) > ratio;
}

double weighted_norm(const VectorXd& v, const MatrixXd& W)
{
  return std::sqrt(std::max(0.0, v.dot(W * v)));
}

}  // namespace tdmpc

namespace tdmpc {

VectorXd nnls(const MatrixXd& A, const VectorXd& b, int max_iter)
{
  const auto n = A.cols();
  if (max_iter <= 0) { max_iter = static_cast<int>(3 * n + 10); }
  const double tol = 1e-12 * std::max(1.0, A.cwiseAbs().maxCoeff()) * std::max<double>(1.0, n);

  VectorXd x = VectorXd::Zero(n);
  std::vector<bool> passive(static_cast<std::size_t>(n), false);

  auto solve_passive = [&](VectorXd& s) {
    std::vector<Eigen::Index> idx;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (passive[static_cast<std::size_t>(j)]) { idx.push_back(j); }
    }
    MatrixXd Ap(A.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) { Ap.col(static_cast<Eigen::Index>(k)) = A.col(idx[k]); }
    const VectorXd sp = Ap.completeOrthogonalDecomposition().solve(b);
    s.setZero(n);
    for (std::size_t k = 0; k < idx.size(); ++k) { s(idx[k]) = sp(static_cast<Eigen::Index>(k)); }
  };

  for (int outer = 0; outer < max_iter; ++outer) {
    const VectorXd w = A.transpose() * (b - A * x);
    Eigen::Index t = -1;
    double best = tol;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!passive[static_cast<std::size_t>(j)] && w(j) > best) {
        best = w(j);
        t = j;
      }
    }
    if (t < 0) { break; }
    passive[static_cast<std::size_t>(t)] = true;

    VectorXd s;
    for (int inner = 0; inner < max_iter; ++inner) {
      solve_passive(s);
      bool all_positive = true;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) { all_positive = false; }
      }
      if (all_positive) { break; }
      double alpha = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && s(j) <= 0.0) {
          alpha = std::min(alpha, x(j) / (x(j) - s(j)));
        }
      }
      x += alpha * (s - x);
      for (Eigen::Index j = 0; j < n; ++j) {
        if (passive[static_cast<std::size_t>(j)] && x(j) <= tol) {
          passive[static_cast<std::size_t>(j)] = false;
          x(j) = 0.0;
        }
      }
    }
    x = s;
  }
  return x.cwiseMax(0.0);
}

}  // namespace tdmpc
