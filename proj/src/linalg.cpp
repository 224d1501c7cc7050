#include "hdselect/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hdselect/errors.hpp"

namespace hdselect::linalg {

std::string se_mode_name(SeMode mode) {
    switch (mode) {
        case SeMode::iid: return "iid";
        case SeMode::robust: return "robust";
        case SeMode::cluster: return "cluster";
    }
    return "unknown";
}

OlsFit ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
    if (X.rows() != y.size()) throw UserError("ols: row count mismatch");
    if (!X.allFinite() || !y.allFinite()) throw UserError("ols: non-finite values in inputs");
    OlsFit fit;
    fit.n = static_cast<int>(X.rows());
    fit.k = static_cast<int>(X.cols());
    if (fit.k == 0) {
        fit.beta = Eigen::VectorXd(0);
        fit.residuals = y;
        fit.rss = y.squaredNorm();
        return fit;
    }
    const Eigen::MatrixXd gram = X.transpose() * X;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    // normal equations are consistent even when X is rank deficient, so the
    // conditioning of the Gram factor is the only reliable signal
    if (ldlt.info() != Eigen::Success || ldlt.rcond() < 1e-13)
        throw NumericError("ols: singular design matrix");
    fit.beta = ldlt.solve(X.transpose() * y);
    fit.residuals = y - X * fit.beta;
    fit.rss = fit.residuals.squaredNorm();
    return fit;
}

Eigen::MatrixXd ols_vcov(const Eigen::MatrixXd& X, const Eigen::VectorXd& residuals,
                         SeMode mode, const std::vector<int>& cluster_ids,
                         int dof_absorbed) {
    const int n = static_cast<int>(X.rows());
    const int k = static_cast<int>(X.cols()) + dof_absorbed;
    if (n <= k) throw NumericError("vcov: no residual degrees of freedom");
    const Eigen::MatrixXd xtx_inv =
        (X.transpose() * X).ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));

    switch (mode) {
        case SeMode::iid: {
            const double sigma2 = residuals.squaredNorm() / (n - k);
            return sigma2 * xtx_inv;
        }
        case SeMode::robust: {
            // HC1: N/(N-k) * (X'X)^-1 (sum_i e_i^2 x_i x_i') (X'X)^-1
            Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(X.cols(), X.cols());
            for (int i = 0; i < n; ++i) {
                const double e2 = residuals(i) * residuals(i);
                meat.noalias() += e2 * (X.row(i).transpose() * X.row(i));
            }
            const double corr = static_cast<double>(n) / (n - k);
            return corr * xtx_inv * meat * xtx_inv;
        }
        case SeMode::cluster: {
            if (static_cast<int>(cluster_ids.size()) != n)
                throw UserError("vcov: cluster ids must cover every row");
            std::map<int, Eigen::VectorXd> scores;
            for (int i = 0; i < n; ++i) {
                auto [it, inserted] =
                    scores.try_emplace(cluster_ids[i], Eigen::VectorXd::Zero(X.cols()));
                it->second.noalias() += residuals(i) * X.row(i).transpose();
            }
            const int g = static_cast<int>(scores.size());
            if (g < 2) throw UserError("vcov: cluster mode needs at least two clusters");
            Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(X.cols(), X.cols());
            for (const auto& [id, s] : scores) meat.noalias() += s * s.transpose();
            const double corr = (static_cast<double>(g) / (g - 1)) *
                                (static_cast<double>(n - 1) / (n - k));
            return corr * xtx_inv * meat * xtx_inv;
        }
    }
    throw NumericError("vcov: unknown mode");
}

Eigen::MatrixXd partial_out(const Eigen::MatrixXd& M, const Eigen::MatrixXd& Z) {
    if (Z.cols() == 0) return M;
    const Eigen::MatrixXd coef = (Z.transpose() * Z).ldlt().solve(Z.transpose() * M);
    return M - Z * coef;
}

Eigen::VectorXd partial_out(const Eigen::VectorXd& v, const Eigen::MatrixXd& Z) {
    if (Z.cols() == 0) return v;
    const Eigen::VectorXd coef = (Z.transpose() * Z).ldlt().solve(Z.transpose() * v);
    return v - Z * coef;
}

std::vector<int> independent_columns(const Eigen::MatrixXd& X, std::vector<int>* dropped,
                                     double rel_tol) {
    const int p = static_cast<int>(X.cols());
    std::vector<int> kept;
    if (dropped) dropped->clear();
    // incremental Cholesky of the Gram matrix restricted to kept columns
    Eigen::MatrixXd L(p, p);
    for (int j = 0; j < p; ++j) {
        const double diag = X.col(j).squaredNorm();
        const int m = static_cast<int>(kept.size());
        Eigen::VectorXd w(m);
        for (int i = 0; i < m; ++i) w(i) = X.col(kept[i]).dot(X.col(j));
        // forward substitution: L(0:m,0:m) ell = w
        Eigen::VectorXd ell(m);
        for (int i = 0; i < m; ++i) {
            double s = w(i);
            for (int t = 0; t < i; ++t) s -= L(i, t) * ell(t);
            ell(i) = s / L(i, i);
        }
        const double rem = diag - ell.squaredNorm();
        if (diag <= 0.0 || rem <= rel_tol * diag) {
            if (dropped) dropped->push_back(j);
            continue;
        }
        for (int i = 0; i < m; ++i) L(m, i) = ell(i);
        L(m, m) = std::sqrt(rem);
        kept.push_back(j);
    }
    return kept;
}

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd out(X.rows(), X.cols() + 1);
    out.col(0) = Eigen::VectorXd::Ones(X.rows());
    out.rightCols(X.cols()) = X;
    return out;
}

}  // namespace hdselect::linalg
