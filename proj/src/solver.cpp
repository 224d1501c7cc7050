#include "hdselect/solver.hpp"

#include <cmath>
#include <limits>

#include "hdselect/errors.hpp"
#include "hdselect/kernels.hpp"

namespace hdselect::solver {

namespace {

inline double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

std::vector<int> active_of(const Eigen::VectorXd& b) {
    std::vector<int> act;
    for (Eigen::Index j = 0; j < b.size(); ++j)
        if (b(j) != 0.0) act.push_back(static_cast<int>(j));
    return act;
}

double objective_of(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                    const Eigen::VectorXd& b, const PenaltyConfig& penalty) {
    const double n = static_cast<double>(X.rows());
    const double rss = (y - X * b).squaredNorm();
    double pen = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j)
        pen += penalty.loadings(j) * std::abs(b(j));
    return rss / n + penalty.lambda * pen / n;
}

void check_inputs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const PenaltyConfig& penalty) {
    if (X.rows() != y.size()) throw UserError("solver: X/y row mismatch");
    if (penalty.loadings.size() != X.cols())
        throw UserError("solver: loadings length must equal number of columns");
    if (penalty.lambda < 0.0) throw UserError("solver: lambda must be >= 0");
    if ((penalty.loadings.array() < 0.0).any())
        throw UserError("solver: loadings must be >= 0");
    if (!X.allFinite() || !y.allFinite())
        throw UserError("solver: NaN/Inf in inputs");
}

}  // namespace

PenaltyConfig PenaltyConfig::uniform(double lambda, Eigen::Index p) {
    return {lambda, Eigen::VectorXd::Ones(p)};
}

LassoFit fit_lasso(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                   const PenaltyConfig& penalty, double tol, int max_iter,
                   const Eigen::VectorXd* warm_start) {
    check_inputs(X, y, penalty);
    if (tol <= 0.0) throw UserError("solver: tol must be > 0");
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const double nd = static_cast<double>(n);

    Eigen::VectorXd colsq(p);
    for (Eigen::Index j = 0; j < p; ++j)
        colsq(j) = kernels::sumsq(X.col(j).data(), static_cast<std::size_t>(n));

    LassoFit fit;
    fit.lambda = penalty.lambda;
    Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
    Eigen::VectorXd r = y;
    if (warm_start) {
        if (warm_start->size() != p) throw UserError("solver: warm start length mismatch");
        b = *warm_start;
        r = y - X * b;
    }

    // thresholds in the z_j = (1/N) x_j'r scale
    Eigen::VectorXd thresh(p);
    for (Eigen::Index j = 0; j < p; ++j)
        thresh(j) = penalty.lambda * penalty.loadings(j) / (2.0 * nd);

    std::vector<char> in_active(p, 0);
    for (Eigen::Index j = 0; j < p; ++j) in_active[j] = b(j) != 0.0;

    auto sweep = [&](bool full) {
        double max_delta = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (!full && !in_active[j]) continue;
            if (colsq(j) <= 0.0) continue;  // an all-zero column never activates
            const double* xj = X.col(j).data();
            const double old = b(j);
            // z_j from the partial residual r + b_j x_j
            double z = kernels::dot(xj, r.data(), static_cast<std::size_t>(n)) / nd +
                       old * colsq(j) / nd;
            const double bj = soft_threshold(z, thresh(j)) * nd / colsq(j);
            if (bj != old) {
                kernels::axpy(old - bj, xj, r.data(), static_cast<std::size_t>(n));
                b(j) = bj;
                const double d = std::abs(bj - old);
                if (d > max_delta) max_delta = d;
                if (bj != 0.0) in_active[j] = 1;
            }
        }
        return max_delta;
    };

    int sweeps = 0;
    bool converged = false;
    while (sweeps < max_iter) {
        ++sweeps;
        const double full_delta = sweep(true);
        if (full_delta <= tol) {
            converged = true;
            break;
        }
        // iterate the active set before paying for another full pass
        while (sweeps < max_iter) {
            ++sweeps;
            if (sweep(false) <= tol) break;
        }
    }

    fit.coefficients = std::move(b);
    fit.active_set = active_of(fit.coefficients);
    fit.iterations = sweeps;
    fit.converged = converged;
    fit.objective = objective_of(X, y, fit.coefficients, penalty);
    fit.kkt_violation = kkt_check(fit, X, y, penalty);
    return fit;
}

Eigen::VectorXd fit_ridge(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                          const PenaltyConfig& penalty) {
    check_inputs(X, y, penalty);
    Eigen::MatrixXd A = X.transpose() * X;
    A.diagonal() += penalty.lambda * penalty.loadings;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    const Eigen::VectorXd rhs = X.transpose() * y;
    // the normal equations are always consistent, so a residual check cannot
    // see rank deficiency; rcond can
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-13)
        throw NumericError(
            "ridge: singular system; with p >= N a positive lambda is required");
    return ldlt.solve(rhs);
}

double kkt_check(const LassoFit& fit, const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                 const PenaltyConfig& penalty) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const double nd = static_cast<double>(n);
    const Eigen::VectorXd r = y - X * fit.coefficients;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        const double g =
            2.0 * kernels::dot(X.col(j).data(), r.data(), static_cast<std::size_t>(n)) / nd;
        const double pen = penalty.lambda * penalty.loadings(j) / nd;
        const double bj = fit.coefficients(j);
        const double v = bj != 0.0 ? std::abs(g - pen * (bj > 0.0 ? 1.0 : -1.0))
                                   : std::max(0.0, std::abs(g) - pen);
        if (v > worst) worst = v;
    }
    return worst;
}

double lambda_max(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& loadings) {
    if (loadings.size() != X.cols())
        throw UserError("lambda_max: loadings length must equal number of columns");
    double lmax = 0.0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        if (loadings(j) <= 0.0)
            throw UserError("lambda_max: loading " + std::to_string(j) +
                            " is zero; partial unpenalized columns out first");
        const double corr = std::abs(
            kernels::dot(X.col(j).data(), y.data(), static_cast<std::size_t>(X.rows())));
        lmax = std::max(lmax, 2.0 * corr / loadings(j));
    }
    // one ulp up so thresholding at exactly lambda_max lands on zero even
    // after the lambda * psi / (2N) round trip
    return std::nextafter(lmax, std::numeric_limits<double>::infinity());
}

PathResult regularization_path(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                               const Eigen::VectorXd& loadings, const PathGrid& grid,
                               double tol, int max_iter) {
    if (grid.n_points < 2) throw UserError("path: n_points must be >= 2");
    if (!(grid.min_ratio > 0.0 && grid.min_ratio < 1.0))
        throw UserError("path: min_ratio must lie in (0,1)");
    PathResult out;
    out.grid = grid;
    out.lambda_max = lambda_max(X, y, loadings);
    if (out.lambda_max <= 0.0)
        throw UserError("path: lambda_max is zero (response orthogonal to all columns)");

    const double log_top = std::log(out.lambda_max);
    const double log_bot = std::log(out.lambda_max * grid.min_ratio);
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(X.cols());
    for (int k = 0; k < grid.n_points; ++k) {
        const double t = static_cast<double>(k) / (grid.n_points - 1);
        // endpoints pinned exactly so the first fit is the zero vector
        const double lambda = k == 0 ? out.lambda_max
                              : k == grid.n_points - 1
                                  ? out.lambda_max * grid.min_ratio
                                  : std::exp(log_top + t * (log_bot - log_top));
        PenaltyConfig penalty{lambda, loadings};
        LassoFit fit = fit_lasso(X, y, penalty, tol, max_iter, &warm);
        warm = fit.coefficients;
        out.fits.emplace_back(lambda, std::move(fit));
    }
    return out;
}

int sparsity_index(const Eigen::VectorXd& coeffs) {
    int s = 0;
    for (Eigen::Index j = 0; j < coeffs.size(); ++j)
        if (coeffs(j) != 0.0) ++s;
    return s;
}

bool is_sparse_solution(int s, int p, int n) {
    return 2 * s <= p && 2 * s <= n;
}

}  // namespace hdselect::solver
