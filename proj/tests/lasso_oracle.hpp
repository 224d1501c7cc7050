#pragma once
#include <Eigen/Dense>
#include <cmath>
#include <limits>

// Exhaustive sign-pattern oracle for the lasso objective, independent of the
// coordinate-descent path: for every sign pattern in {-1,0,+1}^p solve the
// fixed-sign quadratic program
//   X_A' X_A b_A = X_A' y - (lambda/2) psi_A .* sigma_A
// keep solutions consistent with their own signs, and return the smallest
// objective value among them (the optimum lands on its own pattern).
namespace hdtest {

inline double lasso_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                              const Eigen::VectorXd& b, double lambda,
                              const Eigen::VectorXd& psi) {
    const double n = static_cast<double>(X.rows());
    double pen = 0.0;
    for (Eigen::Index j = 0; j < b.size(); ++j) pen += psi(j) * std::abs(b(j));
    return (y - X * b).squaredNorm() / n + lambda * pen / n;
}

inline double lasso_oracle_objective(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                     double lambda, const Eigen::VectorXd& psi) {
    const int p = static_cast<int>(X.cols());
    long total = 1;
    for (int j = 0; j < p; ++j) total *= 3;

    double best = lasso_objective(X, y, Eigen::VectorXd::Zero(p), lambda, psi);
    for (long code = 1; code < total; ++code) {
        long c = code;
        Eigen::VectorXi sigma(p);
        int n_active = 0;
        for (int j = 0; j < p; ++j) {
            const int digit = static_cast<int>(c % 3);  // 0, +1, -1
            c /= 3;
            sigma(j) = digit == 2 ? -1 : digit;
            if (sigma(j) != 0) ++n_active;
        }
        Eigen::MatrixXd Xa(X.rows(), n_active);
        Eigen::VectorXd rhs(n_active);
        std::vector<int> cols;
        int a = 0;
        for (int j = 0; j < p; ++j) {
            if (sigma(j) == 0) continue;
            Xa.col(a) = X.col(j);
            cols.push_back(j);
            ++a;
        }
        const Eigen::MatrixXd gram = Xa.transpose() * Xa;
        for (int i = 0; i < n_active; ++i)
            rhs(i) = Xa.col(i).dot(y) - 0.5 * lambda * psi(cols[i]) * sigma(cols[i]);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
        const Eigen::VectorXd ba = ldlt.solve(rhs);
        if ((gram * ba - rhs).norm() > 1e-8 * std::max(1.0, rhs.norm())) continue;

        bool sign_ok = true;
        for (int i = 0; i < n_active; ++i)
            if (ba(i) * sigma(cols[i]) < 0.0) {
                sign_ok = false;
                break;
            }
        if (!sign_ok) continue;

        Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
        for (int i = 0; i < n_active; ++i) b(cols[i]) = ba(i);
        best = std::min(best, lasso_objective(X, y, b, lambda, psi));
    }
    return best;
}

}  // namespace hdtest
