#pragma once

#include <Eigen/Dense>

namespace tdmpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Largest singular value.
double spectral_norm(const MatrixXd& M);

/// Maximum Euclidean norm over the rows of M, i.e. the induced 2->inf norm.
/// Equals the spectral norm when M has a single row.
double max_row_norm(const MatrixXd& M);

double lambda_max_sym(const MatrixXd& S);
double lambda_min_sym(const MatrixXd& S);

double spectral_radius(const MatrixXd& M);

/// Symmetric positive definite with smallest eigenvalue above `tol`.
bool is_positive_definite(const MatrixXd& S, double tol = 1e-12);

/// [B, AB, ..., A^{n-1}B]
MatrixXd controllability_matrix(const MatrixXd& A, const MatrixXd& B);

/// Numerical rank n with singular value ratio above `ratio`.
bool is_reachable(const MatrixXd& A, const MatrixXd& B, double ratio = 1e-8);

/// ||v||_W = sqrt(v' W v)
double weighted_norm(const VectorXd& v, const MatrixXd& W);

}  // namespace tdmpc

namespace tdmpc {

/// Nonnegative least squares min ||A x - b|| s.t. x >= 0 (Lawson-Hanson active set).
VectorXd nnls(const MatrixXd& A, const VectorXd& b, int max_iter = 0);

}  // namespace tdmpc
