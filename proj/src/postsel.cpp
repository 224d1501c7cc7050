#include "hdselect/postsel.hpp"

#include <algorithm>
#include <set>

#include "hdselect/errors.hpp"
#include "hdselect/linalg.hpp"

namespace hdselect::postsel {

PostFit post_lasso_ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                       const std::vector<int>& active_set,
                       const std::vector<int>& always_in) {
    std::set<int> union_set(active_set.begin(), active_set.end());
    union_set.insert(always_in.begin(), always_in.end());
    for (int j : union_set)
        if (j < 0 || j >= X.cols())
            throw UserError("post_lasso_ols: column index out of range");

    PostFit out;
    out.coefficients = Eigen::VectorXd::Zero(X.cols());
    if (union_set.empty()) {
        out.rss = y.squaredNorm();
        out.dof = static_cast<int>(y.size());
        return out;
    }
    if (static_cast<Eigen::Index>(union_set.size()) >= X.rows())
        throw NumericError("post_lasso_ols: insufficient degrees of freedom after selection");

    std::vector<int> cols(union_set.begin(), union_set.end());
    Eigen::MatrixXd sub(X.rows(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) sub.col(c) = X.col(cols[c]);

    std::vector<int> dropped_local;
    const std::vector<int> kept_local = linalg::independent_columns(sub, &dropped_local);
    if (kept_local.empty())
        throw NumericError("post_lasso_ols: design rank-deficient after drops");
    for (int d : dropped_local) out.dropped.push_back(cols[d]);

    Eigen::MatrixXd design(X.rows(), kept_local.size());
    for (std::size_t c = 0; c < kept_local.size(); ++c)
        design.col(c) = sub.col(kept_local[c]);
    const linalg::OlsFit fit = linalg::ols(design, y);
    for (std::size_t c = 0; c < kept_local.size(); ++c) {
        const int j = cols[kept_local[c]];
        out.coefficients(j) = fit.beta(static_cast<Eigen::Index>(c));
        out.active_set.push_back(j);
    }
    out.rss = fit.rss;
    out.dof = fit.n - fit.k;
    return out;
}

}  // namespace hdselect::postsel
