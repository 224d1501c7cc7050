#include "hdselect/inference.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "hdselect/errors.hpp"
#include "hdselect/postsel.hpp"
#include "hdselect/threads.hpp"

namespace hdselect::inference {

namespace {

// Standardize columns to sum x^2 = N; throws on a constant penalized column.
Eigen::MatrixXd standardize_design(const NamedMatrix& X) {
    const Eigen::Index n = X.values.rows();
    Eigen::MatrixXd out(n, X.values.cols());
    for (Eigen::Index j = 0; j < X.values.cols(); ++j) {
        const double m = X.values.col(j).mean();
        const double var = (X.values.col(j).array() - m).square().sum() / n;
        if (var <= 0.0)
            throw UserError("selection: penalized column '" + X.names[j] +
                            "' is constant (zero scale)");
        out.col(j) = (X.values.col(j).array() - m) / std::sqrt(var);
    }
    return out;
}

Eigen::VectorXd center(const Eigen::VectorXd& v) { return v.array() - v.mean(); }

}  // namespace

EquationSelection select_equation(const Eigen::VectorXd& target, const NamedMatrix& X_hd,
                                  const SelectionConfig& config) {
    EquationSelection out;
    const Eigen::Index p = X_hd.cols();
    if (p == 0) {
        out.fit.coefficients = Eigen::VectorXd(0);
        out.fit.converged = true;
        return out;
    }
    out.standardized = standardize_design(X_hd);
    const Eigen::VectorXd yc = center(target);

    Eigen::VectorXd loadings = Eigen::VectorXd::Ones(p);
    double lambda = 0.0;
    switch (config.method) {
        case tuning::Method::rigorous: {
            tuning::RigorousConfig rc = config.rigorous;
            rc.tol = config.tol;
            rc.max_iter = config.max_iter;
            const tuning::TuningResult t = tuning::detail::rigorous_lambda_impl(
                out.standardized, yc, rc, config.cluster_ids);
            lambda = t.chosen_lambda;
            loadings = t.loadings;
            out.tuning_rounds = t.iterations;
            break;
        }
        case tuning::Method::cv: {
            tuning::CvConfig cc = config.cv;
            cc.tol = config.tol;
            cc.max_iter = config.max_iter;
            cc.n_threads = config.n_threads;
            const tuning::TuningResult t =
                tuning::kfold_cv(out.standardized, yc, loadings, cc);
            lambda = t.chosen_lambda;
            break;
        }
        case tuning::Method::aic:
        case tuning::Method::bic:
        case tuning::Method::ebic: {
            const solver::PathResult path = solver::regularization_path(
                out.standardized, yc, loadings, config.grid, config.tol, config.max_iter);
            const tuning::TuningResult t = tuning::select_by_ic(
                path, out.standardized, yc, config.method, config.ebic_xi);
            lambda = t.chosen_lambda;
            break;
        }
        case tuning::Method::fixed: {
            if (config.fixed_lambda < 0.0)
                throw UserError("selection: fixed tuning requires a lambda >= 0");
            lambda = config.fixed_lambda;
            break;
        }
    }

    out.lambda = lambda;
    out.loadings = loadings;
    out.fit = solver::fit_lasso(out.standardized, yc, {lambda, loadings}, config.tol,
                                config.max_iter);
    for (int j : out.fit.active_set) out.selected.push_back(X_hd.names[j]);
    return out;
}

PdsSelection pds_select(const Eigen::VectorXd& y, const NamedMatrix& D,
                        const NamedMatrix& X_hd, const SelectionConfig& config) {
    for (const auto& d : D.names)
        if (std::count(X_hd.names.begin(), X_hd.names.end(), d))
            throw UserError("pds_select: treatment '" + d + "' also appears in the controls");

    PdsSelection out;
    const std::size_t n_eq = 1 + static_cast<std::size_t>(D.cols());
    std::vector<EquationSelection> eqs(n_eq);
    auto run_eq = [&](std::size_t e) {
        if (e == 0) {
            eqs[0] = select_equation(y, X_hd, config);
        } else {
            eqs[e] = select_equation(D.values.col(static_cast<Eigen::Index>(e - 1)), X_hd,
                                     config);
        }
    };
    parallel_for(n_eq, worker_count(config.n_threads), run_eq);

    out.step1 = eqs[0].selected;
    out.lambdas.push_back(eqs[0].lambda);
    out.loadings.push_back(eqs[0].loadings);
    out.tuning_rounds.push_back(eqs[0].tuning_rounds);
    for (std::size_t e = 1; e < n_eq; ++e) {
        out.step2.push_back(eqs[e].selected);
        out.lambdas.push_back(eqs[e].lambda);
        out.loadings.push_back(eqs[e].loadings);
        out.tuning_rounds.push_back(eqs[e].tuning_rounds);
    }
    return out;
}

PDSResult pds_estimate(const Eigen::VectorXd& y, const NamedMatrix& D,
                       const NamedMatrix& union_controls, const NamedMatrix& unpenalized,
                       linalg::SeMode se_mode, const std::vector<int>& cluster_ids,
                       bool intercept, int dof_absorbed) {
    const Eigen::Index n = y.size();
    const Eigen::Index n_t = D.cols();
    if (n_t == 0) throw UserError("pds_estimate: no treatments given");

    // design: [D | union controls | unpenalized | 1]; treatments first so the
    // alpha block sits at the top of the coefficient vector
    Eigen::Index k = n_t + union_controls.cols() + unpenalized.cols() + (intercept ? 1 : 0);
    Eigen::MatrixXd X(n, k);
    std::vector<std::string> names;
    Eigen::Index c = 0;
    for (Eigen::Index j = 0; j < n_t; ++j, ++c) {
        X.col(c) = D.values.col(j);
        names.push_back(D.names[j]);
    }
    for (Eigen::Index j = 0; j < union_controls.cols(); ++j, ++c) {
        X.col(c) = union_controls.values.col(j);
        names.push_back(union_controls.names[j]);
    }
    for (Eigen::Index j = 0; j < unpenalized.cols(); ++j, ++c) {
        X.col(c) = unpenalized.values.col(j);
        names.push_back(unpenalized.names[j]);
    }
    if (intercept) {
        X.col(c) = Eigen::VectorXd::Ones(n);
        names.push_back("_cons");
    }

    // deterministic collinearity drops, but never of a treatment column
    std::vector<int> dropped;
    std::vector<int> kept = linalg::independent_columns(X, &dropped);
    PDSResult res;
    for (int d : dropped) {
        if (d < static_cast<int>(n_t))
            throw NumericError("pds_estimate: treatment '" + names[d] +
                               "' is collinear with the controls");
        res.dropped_collinear.push_back(names[d]);
    }
    Eigen::MatrixXd Xk(n, kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) Xk.col(i) = X.col(kept[i]);
    if (static_cast<Eigen::Index>(kept.size()) >= n)
        throw NumericError("pds_estimate: more columns than observations after selection");

    const linalg::OlsFit fit = linalg::ols(Xk, y);
    const Eigen::MatrixXd vcov =
        linalg::ols_vcov(Xk, fit.residuals, se_mode, cluster_ids, dof_absorbed);

    res.se_mode = se_mode;
    res.treatment_names = D.names;
    res.alpha = fit.beta.head(n_t);
    res.vcov = vcov.topLeftCorner(n_t, n_t);
    res.n_used = static_cast<int>(n);
    res.full_coefficients = fit.beta;
    for (std::size_t i = 0; i < kept.size(); ++i) res.full_names.push_back(names[kept[i]]);
    for (Eigen::Index j = 0; j < union_controls.cols(); ++j)
        res.union_controls.push_back(union_controls.names[j]);
    for (Eigen::Index j = 0; j < unpenalized.cols(); ++j)
        res.union_controls.push_back(unpenalized.names[j]);
    return res;
}

CHSResult chs_estimate(const Eigen::VectorXd& y, const NamedMatrix& D,
                       const NamedMatrix& X_hd, ChsVariant variant,
                       const SelectionConfig& config, linalg::SeMode se_mode,
                       const std::vector<int>& cluster_ids, int dof_absorbed) {
    const Eigen::Index n = y.size();
    const Eigen::Index n_t = D.cols();
    if (n_t == 0) throw UserError("chs_estimate: no treatments given");

    const std::size_t n_eq = 1 + static_cast<std::size_t>(n_t);
    std::vector<EquationSelection> eqs(n_eq);
    auto run_eq = [&](std::size_t e) {
        const Eigen::VectorXd& target =
            e == 0 ? y : static_cast<const Eigen::VectorXd&>(
                             D.values.col(static_cast<Eigen::Index>(e - 1)));
        eqs[e] = select_equation(target, X_hd, config);
    };
    parallel_for(n_eq, worker_count(config.n_threads), run_eq);

    // orthogonalize each target against its fitted control component
    auto residualize = [&](const Eigen::VectorXd& target,
                           const EquationSelection& eq) -> Eigen::VectorXd {
        const Eigen::VectorXd tc = target.array() - target.mean();
        if (X_hd.cols() == 0) return tc;
        if (variant == ChsVariant::lasso_orthogonalized)
            return tc - eq.standardized * eq.fit.coefficients;
        const postsel::PostFit post =
            postsel::post_lasso_ols(eq.standardized, tc, eq.fit.active_set);
        return tc - eq.standardized * post.coefficients;
    };

    Eigen::VectorXd y_tilde = residualize(y, eqs[0]);
    Eigen::MatrixXd d_tilde(n, n_t);
    for (Eigen::Index j = 0; j < n_t; ++j) {
        d_tilde.col(j) = residualize(D.values.col(j), eqs[j + 1]);
        const double rel = d_tilde.col(j).norm();
        if (rel < 1e-10 * D.values.col(j).norm())
            throw NumericError("chs_estimate: treatment '" + D.names[j] +
                               "' fully explained by controls");
    }

    // residual-on-residual regression, no intercept (everything centered)
    const linalg::OlsFit fit = linalg::ols(d_tilde, y_tilde);
    const Eigen::MatrixXd vcov =
        linalg::ols_vcov(d_tilde, fit.residuals, se_mode, cluster_ids, dof_absorbed);

    CHSResult res;
    res.alpha = fit.beta;
    res.vcov = vcov;
    res.variant = variant;
    res.se_mode = se_mode;
    res.treatment_names = D.names;
    res.selected_step1 = eqs[0].selected;
    for (Eigen::Index j = 0; j < n_t; ++j) res.selected_step2.push_back(eqs[j + 1].selected);
    for (const auto& eq : eqs) {
        res.lambdas.push_back(eq.lambda);
        res.loadings.push_back(eq.loadings);
    }
    res.n_used = static_cast<int>(n);
    return res;
}

}  // namespace hdselect::inference
