#pragma once
#include <Eigen/Dense>
#include <string>
#include <vector>

#include "hdselect/inference.hpp"
#include "hdselect/linalg.hpp"

namespace hdselect::ivhds {

using inference::NamedMatrix;
using inference::SelectionConfig;

struct IvSelection {
    std::vector<std::string> controls_step1;                  // y-equation
    std::vector<std::vector<std::string>> controls_step2;     // per endogenous
    std::vector<std::vector<std::string>> instruments_step2;  // per endogenous
    std::vector<double> lambdas;
    std::vector<Eigen::VectorXd> loadings;  // per equation, step1 first
    // per endogenous column: the part its Step-II lasso leaves unexplained
    // (original units); d minus this column is the lasso-fitted first stage
    Eigen::MatrixXd step2_unexplained;
};

// Step I: lasso of y on the hd controls. Step II: per endogenous variable,
// lasso of d on [controls, instruments]; the active set is split into its
// control and instrument parts. Inputs pre-partialled as in pds_select.
// Unpenalized instruments, when given, are partialled out of the Step-II
// equations (they join the final instrument set unconditionally).
IvSelection iv_lasso_select(const Eigen::VectorXd& y, const NamedMatrix& D_endog,
                            const NamedMatrix& X_hd, const NamedMatrix& Z_hd,
                            const SelectionConfig& config,
                            const NamedMatrix* Z_unpenalized = nullptr);

struct FirstStageStat {
    std::string endogenous;
    double partial_f = 0.0;
    int n_instruments = 0;
};

struct IVResult {
    Eigen::VectorXd alpha;               // endogenous coefficients
    Eigen::MatrixXd vcov;                // endogenous block
    linalg::SeMode se_mode = linalg::SeMode::iid;
    std::vector<std::string> endogenous_names;
    std::vector<std::string> exogenous_names;   // controls kept in the final design
    std::vector<std::string> instrument_names;  // excluded instruments used
    std::vector<FirstStageStat> first_stage;
    std::vector<std::string> dropped_collinear;
    int n_used = 0;
    Eigen::VectorXd full_coefficients;   // [endog, exog, intercept?] after drops
    Eigen::VectorXd full_se;
    std::vector<std::string> full_names;
    std::string estimator = "2SLS";
};

// Two-stage least squares of y on [D_endog, W] instrumented by [Z, W],
// W = selected/unpenalized exogenous controls, Z = excluded instruments.
// use_lasso_fitted switches the first stage from post-lasso OLS fitted
// values to the lasso fitted values supplied in `lasso_first_stage`.
IVResult two_sls(const Eigen::VectorXd& y, const NamedMatrix& D_endog,
                 const NamedMatrix& W_exog, const NamedMatrix& Z_excluded,
                 linalg::SeMode se_mode, const std::vector<int>& cluster_ids = {},
                 bool intercept = true, int dof_absorbed = 0,
                 const Eigen::MatrixXd* lasso_first_stage = nullptr);

}  // namespace hdselect::ivhds
