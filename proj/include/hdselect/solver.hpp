#pragma once
#include <Eigen/Dense>
#include <vector>

namespace hdselect::solver {

// Overall penalty level plus per-predictor loadings psi_j (0 marks an
// unpenalized column). Loadings length must match the design width.
struct PenaltyConfig {
    double lambda = 0.0;
    Eigen::VectorXd loadings;

    static PenaltyConfig uniform(double lambda, Eigen::Index p);
};

struct LassoFit {
    Eigen::VectorXd coefficients;  // standardized scale
    std::vector<int> active_set;   // {j : b_j != 0}
    double lambda = 0.0;
    double objective = 0.0;
    int iterations = 0;  // coordinate sweeps
    bool converged = false;
    double kkt_violation = 0.0;
};

// Minimize (1/N) sum_i (y_i - x_i'b)^2 + (lambda/N) sum_j psi_j |b_j| by
// cyclic coordinate descent with soft-thresholding. Penalized columns are
// expected standardized (sum x^2 = N); unpenalized ones at least centered.
// Stops when no coefficient moves more than tol in a full sweep; the final
// sweep is always over all coordinates so inactive-set violations cannot be
// missed. max_iter exhaustion returns converged=false rather than throwing.
LassoFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const PenaltyConfig& penalty, double tol = 1e-8, int max_iter = 100000,
                   const Eigen::VectorXd* warm_start = nullptr);

// Closed-form ridge: solve (X'X + lambda diag(psi)) b = X'y.
Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const PenaltyConfig& penalty);

// Max subgradient-optimality violation of a fit:
//   active j:   |g_j - (lambda/N) psi_j sign(b_j)|
//   inactive j: max(0, |g_j| - (lambda/N) psi_j)
// with g_j = (2/N) sum_i x_ij r_i.
double kkt_check(const LassoFit& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 const PenaltyConfig& penalty);

// Smallest lambda whose solution is identically zero:
// max_j (2/psi_j) |sum_i x_ij y_i|. Every loading must be positive.
double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& loadings);

struct PathGrid {
    int n_points = 100;
    double min_ratio = 1e-4;
};

struct PathResult {
    std::vector<std::pair<double, LassoFit>> fits;  // lambdas strictly decreasing
    PathGrid grid;
    double lambda_max = 0.0;
};

// Log-spaced grid from lambda_max down to min_ratio*lambda_max, each fit
// warm-started from the previous solution.
PathResult regularization_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& loadings, const PathGrid& grid = {},
                               double tol = 1e-8, int max_iter = 100000);

// l0 pseudo-norm of a coefficient vector.
int sparsity_index(const Eigen::VectorXd& coeffs);

// Sparse-solution property s << p and s << N, operationalized as
// s <= p/2 and s <= N/2.
bool is_sparse_solution(int s, int p, int n);

}  // namespace hdselect::solver
