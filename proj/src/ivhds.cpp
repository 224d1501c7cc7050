#include "hdselect/ivhds.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "hdselect/errors.hpp"
#include "hdselect/threads.hpp"

namespace hdselect::ivhds {

IvSelection iv_lasso_select(const Eigen::VectorXd& y, const NamedMatrix& D_endog,
                            const NamedMatrix& X_hd, const NamedMatrix& Z_hd,
                            const SelectionConfig& config,
                            const NamedMatrix* Z_unpenalized) {
    for (const auto& z : Z_hd.names) {
        if (std::count(X_hd.names.begin(), X_hd.names.end(), z))
            throw UserError("iv_lasso_select: instrument '" + z + "' also listed as control");
        if (std::count(D_endog.names.begin(), D_endog.names.end(), z))
            throw UserError("iv_lasso_select: instrument '" + z + "' is endogenous");
    }

    IvSelection out;
    // Step I: y on the controls only
    inference::EquationSelection eq1 = inference::select_equation(y, X_hd, config);
    out.controls_step1 = eq1.selected;
    out.lambdas.push_back(eq1.lambda);
    out.loadings.push_back(eq1.loadings);

    // Step II: each endogenous d on [controls, instruments], with any
    // unpenalized instruments partialled out first
    NamedMatrix XZ;
    XZ.values.resize(y.size(), X_hd.cols() + Z_hd.cols());
    if (X_hd.cols() > 0) XZ.values.leftCols(X_hd.cols()) = X_hd.values;
    if (Z_hd.cols() > 0) XZ.values.rightCols(Z_hd.cols()) = Z_hd.values;
    XZ.names = X_hd.names;
    XZ.names.insert(XZ.names.end(), Z_hd.names.begin(), Z_hd.names.end());

    Eigen::MatrixXd D_eff = D_endog.values;
    if (Z_unpenalized && Z_unpenalized->cols() > 0) {
        XZ.values = linalg::partial_out(XZ.values, Z_unpenalized->values);
        D_eff = linalg::partial_out(D_eff, Z_unpenalized->values);
    }

    const std::size_t n_endog = static_cast<std::size_t>(D_endog.cols());
    std::vector<inference::EquationSelection> eqs(n_endog);
    parallel_for(n_endog, worker_count(config.n_threads), [&](std::size_t e) {
        eqs[e] = inference::select_equation(D_eff.col(static_cast<Eigen::Index>(e)), XZ,
                                            config);
    });
    const std::set<std::string> control_names(X_hd.names.begin(), X_hd.names.end());
    out.step2_unexplained.resize(y.size(), D_endog.cols());
    for (std::size_t e = 0; e < n_endog; ++e) {
        std::vector<std::string> ctrl, inst;
        for (const auto& name : eqs[e].selected)
            (control_names.count(name) ? ctrl : inst).push_back(name);
        out.controls_step2.push_back(std::move(ctrl));
        out.instruments_step2.push_back(std::move(inst));
        out.lambdas.push_back(eqs[e].lambda);
        out.loadings.push_back(eqs[e].loadings);
        const auto j = static_cast<Eigen::Index>(e);
        Eigen::VectorXd fitted = Eigen::VectorXd::Zero(y.size());
        if (XZ.cols() > 0) fitted = eqs[e].standardized * eqs[e].fit.coefficients;
        out.step2_unexplained.col(j) =
            (D_eff.col(j).array() - D_eff.col(j).mean()).matrix() - fitted;
    }
    return out;
}

IVResult two_sls(const Eigen::VectorXd& y, const NamedMatrix& D_endog,
                 const NamedMatrix& W_exog, const NamedMatrix& Z_excluded,
                 linalg::SeMode se_mode, const std::vector<int>& cluster_ids,
                 bool intercept, int dof_absorbed,
                 const Eigen::MatrixXd* lasso_first_stage) {
    const Eigen::Index n = y.size();
    const Eigen::Index n_endog = D_endog.cols();
    if (n_endog == 0) throw UserError("two_sls: no endogenous variables");
    if (Z_excluded.cols() == 0)
        throw NumericError(
            "two_sls: no instruments survived selection; instrument selection can fail "
            "when the first stage is weak or not sparse");
    if (Z_excluded.cols() < n_endog)
        throw NumericError("two_sls: order condition violated (" +
                           std::to_string(Z_excluded.cols()) + " instruments for " +
                           std::to_string(n_endog) + " endogenous variables)");

    // exogenous block shared by both stages, pruned deterministically
    Eigen::Index kw = W_exog.cols() + (intercept ? 1 : 0);
    Eigen::MatrixXd W(n, kw);
    std::vector<std::string> w_names;
    for (Eigen::Index j = 0; j < W_exog.cols(); ++j) {
        W.col(j) = W_exog.values.col(j);
        w_names.push_back(W_exog.names[j]);
    }
    if (intercept) {
        W.col(kw - 1) = Eigen::VectorXd::Ones(n);
        w_names.push_back("_cons");
    }
    IVResult res;
    {
        std::vector<int> dropped;
        const std::vector<int> kept = linalg::independent_columns(W, &dropped);
        for (int d : dropped) res.dropped_collinear.push_back(w_names[d]);
        Eigen::MatrixXd Wk(n, kept.size());
        std::vector<std::string> names_k;
        for (std::size_t i = 0; i < kept.size(); ++i) {
            Wk.col(i) = W.col(kept[i]);
            names_k.push_back(w_names[kept[i]]);
        }
        W = std::move(Wk);
        w_names = std::move(names_k);
    }

    // instrument matrix [Z, W]; drop instruments collinear with W or each other
    Eigen::MatrixXd ZW(n, W.cols() + Z_excluded.cols());
    ZW.leftCols(W.cols()) = W;  // W first so instruments get dropped, not controls
    ZW.rightCols(Z_excluded.cols()) = Z_excluded.values;
    std::vector<std::string> kept_instruments;
    {
        std::vector<int> dropped;
        const std::vector<int> kept = linalg::independent_columns(ZW, &dropped);
        Eigen::MatrixXd Zk(n, kept.size());
        for (std::size_t i = 0; i < kept.size(); ++i) Zk.col(i) = ZW.col(kept[i]);
        for (int j : kept)
            if (j >= W.cols())
                kept_instruments.push_back(Z_excluded.names[j - W.cols()]);
        for (int d : dropped)
            if (d >= W.cols())
                res.dropped_collinear.push_back(Z_excluded.names[d - W.cols()]);
        ZW = std::move(Zk);
    }
    if (static_cast<Eigen::Index>(kept_instruments.size()) < n_endog)
        throw NumericError("two_sls: order condition violated after collinearity drops");

    // structural design X = [D, W]; instrument matrix V = [Dhat, W]
    Eigen::MatrixXd X(n, n_endog + W.cols());
    X.leftCols(n_endog) = D_endog.values;
    X.rightCols(W.cols()) = W;
    if (X.cols() >= n) throw NumericError("two_sls: more columns than observations");

    Eigen::MatrixXd Dhat(n, n_endog);
    if (lasso_first_stage) {
        if (lasso_first_stage->rows() != n || lasso_first_stage->cols() != n_endog)
            throw UserError("two_sls: lasso first-stage dimensions mismatch");
        Dhat = *lasso_first_stage;
    } else {
        // post-lasso first stage: OLS of each d on [Z, W]
        for (Eigen::Index j = 0; j < n_endog; ++j) {
            const linalg::OlsFit fs = linalg::ols(ZW, D_endog.values.col(j));
            Dhat.col(j) = ZW * fs.beta;
        }
    }
    Eigen::MatrixXd V(n, n_endog + W.cols());
    V.leftCols(n_endog) = Dhat;
    V.rightCols(W.cols()) = W;

    const Eigen::MatrixXd vtx = V.transpose() * X;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(vtx);
    if (!lu.isInvertible())
        throw NumericError("two_sls: singular instrument cross-product (weak instruments?)");
    const Eigen::VectorXd beta = lu.solve(V.transpose() * y);
    const Eigen::VectorXd resid = y - X * beta;

    const int k = static_cast<int>(X.cols()) + dof_absorbed;
    if (n <= k) throw NumericError("two_sls: no residual degrees of freedom");
    const Eigen::MatrixXd vtx_inv = lu.inverse();
    Eigen::MatrixXd meat(V.cols(), V.cols());
    double corr = 1.0;
    switch (se_mode) {
        case linalg::SeMode::iid: {
            const double sigma2 = resid.squaredNorm() / (n - k);
            meat = sigma2 * (V.transpose() * V);
            break;
        }
        case linalg::SeMode::robust: {
            meat.setZero();
            for (Eigen::Index i = 0; i < n; ++i)
                meat.noalias() += resid(i) * resid(i) * (V.row(i).transpose() * V.row(i));
            corr = static_cast<double>(n) / (n - k);
            break;
        }
        case linalg::SeMode::cluster: {
            if (static_cast<Eigen::Index>(cluster_ids.size()) != n)
                throw UserError("two_sls: cluster ids must cover every row");
            std::map<int, Eigen::VectorXd> scores;
            for (Eigen::Index i = 0; i < n; ++i) {
                auto [it, inserted] =
                    scores.try_emplace(cluster_ids[i], Eigen::VectorXd::Zero(V.cols()));
                it->second.noalias() += resid(i) * V.row(i).transpose();
            }
            const int g = static_cast<int>(scores.size());
            if (g < 2) throw UserError("two_sls: cluster mode needs at least two clusters");
            meat.setZero();
            for (const auto& [id, s] : scores) meat.noalias() += s * s.transpose();
            corr = (static_cast<double>(g) / (g - 1)) *
                   (static_cast<double>(n - 1) / (n - k));
            break;
        }
    }
    const Eigen::MatrixXd vcov = corr * vtx_inv * meat * vtx_inv.transpose();

    // first-stage partial F per endogenous variable
    for (Eigen::Index j = 0; j < n_endog; ++j) {
        const Eigen::VectorXd d = D_endog.values.col(j);
        const linalg::OlsFit unres = linalg::ols(ZW, d);
        double rss_r;
        if (W.cols() > 0) {
            rss_r = linalg::ols(W, d).rss;
        } else {
            rss_r = d.squaredNorm();
        }
        const int q = static_cast<int>(ZW.cols() - W.cols());
        const int dof_u = static_cast<int>(n - ZW.cols());
        FirstStageStat st;
        st.endogenous = D_endog.names[j];
        st.n_instruments = q;
        if (q > 0 && dof_u > 0 && unres.rss > 0.0)
            st.partial_f = ((rss_r - unres.rss) / q) / (unres.rss / dof_u);
        res.first_stage.push_back(st);
    }

    res.alpha = beta.head(n_endog);
    res.vcov = vcov.topLeftCorner(n_endog, n_endog);
    res.full_se = vcov.diagonal().cwiseMax(0.0).cwiseSqrt();
    res.se_mode = se_mode;
    res.endogenous_names = D_endog.names;
    res.exogenous_names = w_names;
    res.instrument_names = kept_instruments;
    res.n_used = static_cast<int>(n);
    res.full_coefficients = beta;
    res.full_names = D_endog.names;
    res.full_names.insert(res.full_names.end(), w_names.begin(), w_names.end());
    return res;
}

}  // namespace hdselect::ivhds
