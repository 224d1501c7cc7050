#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "hdselect/linalg.hpp"
#include "hdselect/solver.hpp"

namespace hdselect::tuning {

enum class Method { aic, bic, ebic, cv, rigorous, fixed };

std::string method_name(Method m);

struct TuningResult {
    Method method = Method::rigorous;
    double chosen_lambda = 0.0;
    Eigen::VectorXd loadings;
    int iterations = 0;                 // loading-update rounds (rigorous)
    std::vector<double> grid_lambdas;   // ic / cv
    std::vector<double> scores;         // ic scores or cv curve
    std::vector<std::string> notes;
};

// Information-criterion selection over a fitted path:
// score = N ln(RSS/N) + penalty * df, df = |active set|;
// penalty 2 (aic), ln N (bic), ln N + 2 xi ln p (ebic). Ties go to the
// larger lambda (the sparser model).
TuningResult select_by_ic(const solver::PathResult& path, const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y, Method criterion, double ebic_xi = 1.0);

struct CvConfig {
    int folds = 10;
    std::uint64_t seed = 0;
    solver::PathGrid grid;
    double tol = 1e-8;
    int max_iter = 100000;
    std::size_t n_threads = 1;
};

// K-fold cross-validated lambda on a common grid. Fold standardization is
// computed on training rows only; fold assignment depends only on the seed.
TuningResult kfold_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& loadings, const CvConfig& config);

struct RigorousConfig {
    linalg::SeMode mode = linalg::SeMode::robust;
    double c = 1.1;
    double gamma = 0.0;  // 0 = default 0.1 / ln N
    int max_rounds = 15;
    double loading_tol = 1e-4;
    double tol = 1e-8;
    int max_iter = 100000;
};

// Theory-driven plug-in penalty lambda = 2 c sqrt(N) Phi^-1(1 - gamma/(2p))
// with iteratively reweighted loadings (iid / heteroskedasticity-robust /
// cluster-robust). X must be standardized and y centered. Rejects p < 2.
TuningResult rigorous_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const RigorousConfig& config = {},
                             const std::vector<int>& cluster_ids = {});

namespace detail {
// same plug-in without the p >= 2 gate; the selection pipeline uses it for
// degenerate single-column penalized sets
TuningResult rigorous_lambda_impl(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const RigorousConfig& config,
                                  const std::vector<int>& cluster_ids);
}  // namespace detail

}  // namespace hdselect::tuning
