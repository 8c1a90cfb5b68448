#pragma once

#include <Eigen/Dense>

#include <vector>

namespace tdmpc {

/// Linear rollout z(l) = Phi[l] x0 + Gamma[l] u for the stacked input u = (u(0), ..., u(N-1)).
struct Prediction
{
  std::vector<Eigen::MatrixXd> Phi;    ///< N+1 blocks, n x n
  std::vector<Eigen::MatrixXd> Gamma;  ///< N+1 blocks, n x N m

  static Prediction build(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B, int N)
  {
    const auto n = A.rows();
    const auto m = B.cols();
    Prediction pr;
    pr.Phi.reserve(static_cast<std::size_t>(N) + 1);
    pr.Gamma.reserve(static_cast<std::size_t>(N) + 1);
    pr.Phi.push_back(Eigen::MatrixXd::Identity(n, n));
    pr.Gamma.push_back(Eigen::MatrixXd::Zero(n, N * m));
    for (int l = 1; l <= N; ++l) {
      pr.Phi.push_back(A * pr.Phi.back());
      Eigen::MatrixXd G = A * pr.Gamma.back();
      G.middleCols((l - 1) * m, m) += B;
      pr.Gamma.push_back(std::move(G));
    }
    return pr;
  }
};

}  // namespace tdmpc
