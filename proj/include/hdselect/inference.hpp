#pragma once
#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "hdselect/linalg.hpp"
#include "hdselect/solver.hpp"
#include "hdselect/tuning.hpp"

namespace hdselect::inference {

// A design block with its column names.
struct NamedMatrix {
    Eigen::MatrixXd values;
    std::vector<std::string> names;

    Eigen::Index cols() const { return values.cols(); }
    Eigen::Index rows() const { return values.rows(); }
};

// How the selection lassos pick their penalty.
struct SelectionConfig {
    tuning::Method method = tuning::Method::rigorous;
    tuning::RigorousConfig rigorous;     // rigorous mode (default: robust loadings)
    tuning::CvConfig cv;                 // cv mode
    solver::PathGrid grid;               // ic modes
    double fixed_lambda = -1.0;          // fixed mode (>= 0)
    double ebic_xi = 1.0;
    double tol = 1e-8;
    int max_iter = 100000;
    std::size_t n_threads = 1;
    std::vector<int> cluster_ids;        // for cluster-robust loadings
};

// One selection lasso: standardizes X internally, tunes lambda per the
// config, returns the fit on the standardized scale plus the selected names.
struct EquationSelection {
    solver::LassoFit fit;
    std::vector<std::string> selected;
    double lambda = 0.0;
    Eigen::VectorXd loadings;
    int tuning_rounds = 0;
    Eigen::MatrixXd standardized;  // the design the fit refers to
};

EquationSelection select_equation(const Eigen::VectorXd& target, const NamedMatrix& X_hd,
                                  const SelectionConfig& config);

struct PdsSelection {
    std::vector<std::string> step1;                     // y-equation controls
    std::vector<std::vector<std::string>> step2;        // per treatment
    std::vector<double> lambdas;                        // step1 then step2 order
    std::vector<Eigen::VectorXd> loadings;              // same order
    std::vector<int> tuning_rounds;
};

// Steps I and II of post-double selection. Inputs must already have any
// unpenalized controls partialled out (including the intercept).
PdsSelection pds_select(const Eigen::VectorXd& y, const NamedMatrix& D,
                        const NamedMatrix& X_hd, const SelectionConfig& config);

struct PDSResult {
    Eigen::VectorXd alpha;                  // treatment coefficients
    Eigen::MatrixXd vcov;                   // treatment block
    linalg::SeMode se_mode = linalg::SeMode::iid;
    std::vector<std::string> treatment_names;
    std::vector<std::string> selected_step1;
    std::vector<std::vector<std::string>> selected_step2;
    std::vector<std::string> union_controls;  // step1 u step2 u aset u unpenalized
    std::vector<std::string> dropped_collinear;
    int n_used = 0;
    // full final regression, for --full reports: [D, union controls, intercept]
    Eigen::VectorXd full_coefficients;
    std::vector<std::string> full_names;
};

// Step III: OLS of y on [D, union controls, unpenalized controls, intercept].
// dof_absorbed feeds the small-sample SE corrections (fixed-effects groups).
PDSResult pds_estimate(const Eigen::VectorXd& y, const NamedMatrix& D,
                       const NamedMatrix& union_controls, const NamedMatrix& unpenalized,
                       linalg::SeMode se_mode, const std::vector<int>& cluster_ids = {},
                       bool intercept = true, int dof_absorbed = 0);

enum class ChsVariant { lasso_orthogonalized, post_lasso_orthogonalized };

struct CHSResult {
    Eigen::VectorXd alpha;
    Eigen::MatrixXd vcov;
    ChsVariant variant = ChsVariant::post_lasso_orthogonalized;
    linalg::SeMode se_mode = linalg::SeMode::iid;
    std::vector<std::string> treatment_names;
    std::vector<std::string> selected_step1;
    std::vector<std::vector<std::string>> selected_step2;
    std::vector<double> lambdas;            // step1 then per treatment
    std::vector<Eigen::VectorXd> loadings;  // same order
    int n_used = 0;
};

// Partialling-out estimator: residualize y and each treatment on their
// lasso (or post-lasso OLS) control fits, then regress residual on residual.
// Inputs as in pds_select.
CHSResult chs_estimate(const Eigen::VectorXd& y, const NamedMatrix& D,
                       const NamedMatrix& X_hd, ChsVariant variant,
                       const SelectionConfig& config, linalg::SeMode se_mode,
                       const std::vector<int>& cluster_ids = {}, int dof_absorbed = 0);

}  // namespace hdselect::inference
