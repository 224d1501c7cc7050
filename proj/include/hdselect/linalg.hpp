#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

namespace hdselect::linalg {

enum class SeMode { iid, robust, cluster };

std::string se_mode_name(SeMode mode);

struct OlsFit {
    Eigen::VectorXd beta;
    Eigen::VectorXd residuals;
    double rss = 0.0;
    int n = 0;
    int k = 0;
};

// Least squares via LDLT of the normal equations; throws NumericError on a
// numerically singular system.
OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

// Coefficient covariance for an OLS fit. dof_absorbed adds to k in the
// small-sample corrections (fixed-effects groups absorbed by a within
// transform). cluster_ids must have one entry per row in cluster mode.
Eigen::MatrixXd ols_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                         SeMode mode, const std::vector<int>& cluster_ids = {},
                         int dof_absorbed = 0);

// Residualize each column of M on Z (no intercept; include a constant
// column in Z to center). Z empty returns M unchanged.
Eigen::MatrixXd partial_out(const Eigen::MatrixXd& M, const Eigen::MatrixXd& Z);
Eigen::VectorXd partial_out(const Eigen::VectorXd& v, const Eigen::MatrixXd& Z);

// Greedy full-rank subset in column order: keep a column iff it is not in
// the span of the columns kept before it (incremental Cholesky on the Gram
// matrix). Returns kept column indices; `dropped` (optional) gets the rest.
std::vector<int> independent_columns(const Eigen::MatrixXd& X,
                                     std::vector<int>* dropped = nullptr,
                                     double rel_tol = 1e-9);

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X);

}  // namespace hdselect::linalg
