#pragma once
#include <Eigen/Dense>
#include <vector>

namespace hdselect::postsel {

struct PostFit {
    Eigen::VectorXd coefficients;  // full length, zero off the active set
    std::vector<int> active_set;   // columns actually used (after rank drops)
    std::vector<int> dropped;      // collinear columns dropped, in column order
    double rss = 0.0;
    int dof = 0;                   // residual degrees of freedom
};

// OLS refit on active_set plus always_in columns; relieves the shrinkage
// (attenuation) bias of the penalized first stage. Collinear columns are
// dropped deterministically by column order.
PostFit post_lasso_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const std::vector<int>& active_set,
                       const std::vector<int>& always_in = {});

}  // namespace hdselect::postsel
