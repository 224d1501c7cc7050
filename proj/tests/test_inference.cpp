#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hdselect/errors.hpp"
#include "hdselect/inference.hpp"
#include "test_helpers.hpp"

using namespace hdselect;
using namespace hdselect::inference;
using hdtest::centered;
using hdtest::correlated_matrix;
using hdtest::random_matrix;
using hdtest::random_vector;

namespace {

NamedMatrix named(const Eigen::MatrixXd& m, const std::string& prefix) {
    NamedMatrix out;
    out.values = m;
    for (Eigen::Index j = 0; j < m.cols(); ++j)
        out.names.push_back(prefix + std::to_string(j + 1));
    return out;
}

SelectionConfig rigorous_config() {
    SelectionConfig sc;
    sc.method = tuning::Method::rigorous;
    return sc;
}

}  // namespace

TEST_CASE("pds_select with no controls returns empty selections") {
    Rng rng(1);
    const Eigen::VectorXd y = centered(random_vector(rng, 30));
    NamedMatrix D = named(random_matrix(rng, 30, 1), "d");
    D.values = D.values.rowwise() - D.values.colwise().mean();
    NamedMatrix empty;
    empty.values.resize(30, 0);
    const auto sel = pds_select(y, D, empty, rigorous_config());
    CHECK(sel.step1.empty());
    CHECK(sel.step2.size() == 1);
    CHECK(sel.step2[0].empty());
}

TEST_CASE("confounders of the treatment only: step two is the one that finds them") {
    Rng rng(2);
    const int n = 100, p = 20, reps = 200;
    int step2_nonempty = 0, step1_empty = 0;
    for (int r = 0; r < reps; ++r) {
        const Eigen::MatrixXd X = random_matrix(rng, n, p);
        Eigen::VectorXd gamma = Eigen::VectorXd::Zero(p);
        gamma.head(3).setConstant(1.0);
        Eigen::VectorXd d(n), y(n);
        for (int i = 0; i < n; ++i) {
            d(i) = X.row(i).head(3).sum() * 1.0 + rng.normal();
            y(i) = 0.25 * d(i) + rng.normal();  // beta = 0: controls hit y only via d
        }
        const auto sel =
            pds_select(centered(y), {centered(d), {"d1"}}, named(X, "c"), rigorous_config());
        if (!sel.step2[0].empty()) ++step2_nonempty;
        if (sel.step1.empty()) ++step1_empty;
    }
    INFO("step2 nonempty: ", step2_nonempty, " step1 empty: ", step1_empty);
    CHECK(step2_nonempty >= 180);  // >= 0.9
    CHECK(step1_empty > reps / 2);
}

TEST_CASE("randomized treatment: step two stays empty at the rigorous penalty") {
    Rng rng(3);
    const int n = 100, p = 20, reps = 200;
    int empty = 0;
    for (int r = 0; r < reps; ++r) {
        const Eigen::MatrixXd X = random_matrix(rng, n, p);
        const Eigen::VectorXd d = random_vector(rng, n);  // independent of controls
        const auto sel = pds_select(centered(random_vector(rng, n)),
                                    {centered(d), {"d1"}}, named(X, "c"),
                                    rigorous_config());
        if (sel.step2[0].empty()) ++empty;
    }
    INFO("empty step2: ", empty, "/", reps);
    CHECK(empty >= 180);
}

TEST_CASE("pds_estimate without controls is the simple OLS slope") {
    Rng rng(4);
    const int n = 50;
    const Eigen::VectorXd d = random_vector(rng, n);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = 2.0 + 1.3 * d(i) + 0.4 * rng.normal();

    NamedMatrix D = named(d, "d");
    NamedMatrix empty;
    empty.values.resize(n, 0);
    const auto res = pds_estimate(y, D, empty, empty, linalg::SeMode::iid);
    const double dc_yc = (d.array() - d.mean()).matrix().dot(
        (y.array() - y.mean()).matrix());
    const double slope = dc_yc / (d.array() - d.mean()).square().sum();
    CHECK(res.alpha(0) == doctest::Approx(slope).epsilon(1e-10));
}

TEST_CASE("cluster-constant errors make cluster SEs at least as large as iid") {
    Rng rng(5);
    const int g = 12, per = 8, n = g * per;
    Eigen::VectorXd d(n), y(n);
    std::vector<int> ids(n);
    for (int k = 0; k < g; ++k) {
        const double shock = 2.0 * rng.normal();  // shared within the cluster
        for (int s = 0; s < per; ++s) {
            const int i = k * per + s;
            ids[i] = k;
            d(i) = rng.normal();
            y(i) = 0.5 * d(i) + shock;
        }
    }
    NamedMatrix D = named(d, "d");
    NamedMatrix empty;
    empty.values.resize(n, 0);
    const auto iid = pds_estimate(y, D, empty, empty, linalg::SeMode::iid);
    const auto cl = pds_estimate(y, D, empty, empty, linalg::SeMode::cluster, ids);
    CHECK(std::sqrt(cl.vcov(0, 0)) >= std::sqrt(iid.vcov(0, 0)));
}

TEST_CASE("confounded DGP: naive OLS is badly biased, PDS is not") {
    Rng rng(6);
    const int n = 100, p = 50, reps = 100;
    const Eigen::MatrixXd chol = hdtest::toeplitz_chol(p, 0.5);
    std::vector<double> pds_err, ols_err;
    for (int r = 0; r < reps; ++r) {
        const Eigen::MatrixXd X = correlated_matrix(rng, n, p, 0.5, &chol);
        Eigen::VectorXd beta = Eigen::VectorXd::Zero(p), gamma = Eigen::VectorXd::Zero(p);
        beta.head(5).setConstant(0.5);
        gamma.head(5).setConstant(0.5);
        Eigen::VectorXd d(n), y(n);
        for (int i = 0; i < n; ++i) {
            d(i) = X.row(i).dot(gamma) + rng.normal();
            y(i) = 0.5 * d(i) + X.row(i).dot(beta) + rng.normal();
        }
        NamedMatrix D = named(d, "d");
        NamedMatrix Xn = named(X, "c");
        NamedMatrix empty;
        empty.values.resize(n, 0);

        Eigen::MatrixXd P = Eigen::MatrixXd::Ones(n, 1);
        const Eigen::VectorXd y_sel = linalg::partial_out(y, P);
        const NamedMatrix D_sel{linalg::partial_out(D.values, P), D.names};
        const NamedMatrix X_sel{linalg::partial_out(Xn.values, P), Xn.names};
        const auto sel = pds_select(y_sel, D_sel, X_sel, rigorous_config());
        std::vector<std::string> union_ctl = sel.step1;
        for (const auto& name : sel.step2[0])
            if (!std::count(union_ctl.begin(), union_ctl.end(), name))
                union_ctl.push_back(name);
        Eigen::MatrixXd U(n, union_ctl.size());
        for (std::size_t c = 0; c < union_ctl.size(); ++c) {
            const int j = std::stoi(union_ctl[c].substr(1)) - 1;
            U.col(c) = X.col(j);
        }
        const auto res =
            pds_estimate(y, D, {U, union_ctl}, empty, linalg::SeMode::robust);
        pds_err.push_back(std::abs(res.alpha(0) - 0.5));

        const auto naive = pds_estimate(y, D, NamedMatrix{Eigen::MatrixXd(n, 0), {}},
                                        empty, linalg::SeMode::iid);
        ols_err.push_back(std::abs(naive.alpha(0) - 0.5));
    }
    auto median = [](std::vector<double> v) {
        std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
        return v[v.size() / 2];
    };
    const double m_pds = median(pds_err), m_ols = median(ols_err);
    INFO("median |err| pds: ", m_pds, " ols: ", m_ols);
    CHECK(m_ols > 2.0 * m_pds);
}

TEST_CASE("union rule: every selected or forced name reaches the final design") {
    Rng rng(7);
    const int n = 80, p = 15;
    const Eigen::MatrixXd X = random_matrix(rng, n, p);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    beta.head(4).setConstant(0.9);
    Eigen::VectorXd d(n), y(n);
    for (int i = 0; i < n; ++i) {
        d(i) = X.row(i).head(4).sum() * 0.7 + rng.normal();
        y(i) = 0.5 * d(i) + X.row(i).dot(beta) + rng.normal();
    }
    NamedMatrix D = named(d, "d");
    NamedMatrix Xn = named(X, "c");
    Eigen::MatrixXd P = Eigen::MatrixXd::Ones(n, 1);
    const auto sel = pds_select(linalg::partial_out(y, P),
                                {linalg::partial_out(D.values, P), D.names},
                                {linalg::partial_out(Xn.values, P), Xn.names},
                                rigorous_config());
    std::vector<std::string> aset{"c15"};
    std::set<std::string> members;
    for (const auto& s : sel.step1) members.insert(s);
    for (const auto& s : sel.step2[0]) members.insert(s);
    for (const auto& s : aset) members.insert(s);
    std::vector<std::string> union_ctl;
    for (const auto& name : Xn.names)
        if (members.count(name)) union_ctl.push_back(name);
    Eigen::MatrixXd U(n, union_ctl.size());
    for (std::size_t c = 0; c < union_ctl.size(); ++c)
        U.col(c) = X.col(std::stoi(union_ctl[c].substr(1)) - 1);
    NamedMatrix empty;
    empty.values.resize(n, 0);
    const auto res = pds_estimate(y, D, {U, union_ctl}, empty, linalg::SeMode::iid);
    for (const auto& s : members)
        CHECK(std::count(res.union_controls.begin(), res.union_controls.end(), s) == 1);
}

TEST_CASE("CHS with no controls collapses to the OLS slope in both variants") {
    Rng rng(8);
    const int n = 60;
    const Eigen::VectorXd d = random_vector(rng, n);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) y(i) = 1.0 + 0.8 * d(i) + 0.3 * rng.normal();
    NamedMatrix empty;
    empty.values.resize(n, 0);

    const double slope = (d.array() - d.mean()).matrix().dot(
                             (y.array() - y.mean()).matrix()) /
                         (d.array() - d.mean()).square().sum();
    for (auto variant : {ChsVariant::lasso_orthogonalized,
                         ChsVariant::post_lasso_orthogonalized}) {
        const auto res = chs_estimate(centered(y), {centered(d), {"d1"}}, empty, variant,
                                      rigorous_config(), linalg::SeMode::iid);
        CHECK(res.alpha(0) == doctest::Approx(slope).epsilon(1e-10));
    }
}

TEST_CASE("FWL at lambda = 0: CHS equals the full OLS coefficient") {
    Rng rng(9);
    const int n = 60, p = 8;
    const Eigen::MatrixXd X = random_matrix(rng, n, p);
    const Eigen::VectorXd d = random_vector(rng, n) + X.col(0);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i)
        y(i) = 0.5 * d(i) + X(i, 0) - 0.5 * X(i, 1) + rng.normal();

    SelectionConfig sc;
    sc.method = tuning::Method::fixed;
    sc.fixed_lambda = 0.0;
    for (auto variant : {ChsVariant::lasso_orthogonalized,
                         ChsVariant::post_lasso_orthogonalized}) {
        const auto res = chs_estimate(centered(y), {centered(d), {"d1"}},
                                      named(X.rowwise() - X.colwise().mean(), "c"),
                                      variant, sc, linalg::SeMode::iid);
        // full-OLS oracle: y on [1, d, X]
        Eigen::MatrixXd full(n, p + 2);
        full.col(0).setOnes();
        full.col(1) = d;
        full.rightCols(p) = X;
        const Eigen::VectorXd beta = linalg::ols(full, y).beta;
        CHECK(res.alpha(0) == doctest::Approx(beta(1)).epsilon(1e-8));
    }
}

TEST_CASE("rescaling an HD control leaves selection and estimates unchanged") {
    Rng rng(10);
    const int n = 80, p = 10;
    const Eigen::MatrixXd X = random_matrix(rng, n, p);
    Eigen::VectorXd d(n), y(n);
    for (int i = 0; i < n; ++i) {
        d(i) = 0.8 * X(i, 0) + rng.normal();
        y(i) = 0.5 * d(i) + 0.9 * X(i, 0) + rng.normal();
    }
    NamedMatrix Xn = named(X, "c");
    Eigen::MatrixXd X2 = X;
    X2.col(0) *= 1000.0;  // selection standardizes internally
    NamedMatrix Xn2{X2, Xn.names};

    Eigen::MatrixXd P = Eigen::MatrixXd::Ones(n, 1);
    const Eigen::VectorXd y_sel = linalg::partial_out(y, P);
    const NamedMatrix D_sel{linalg::partial_out(d, P), {"d1"}};
    const auto s1 = pds_select(y_sel, D_sel, {linalg::partial_out(Xn.values, P), Xn.names},
                               rigorous_config());
    const auto s2 = pds_select(y_sel, D_sel, {linalg::partial_out(Xn2.values, P), Xn2.names},
                               rigorous_config());
    CHECK(s1.step1 == s2.step1);
    CHECK(s1.step2 == s2.step2);

    NamedMatrix empty;
    empty.values.resize(n, 0);
    auto estimate = [&](const NamedMatrix& src, const std::vector<std::string>& sel) {
        Eigen::MatrixXd U(n, sel.size());
        for (std::size_t c = 0; c < sel.size(); ++c) {
            const auto it = std::find(src.names.begin(), src.names.end(), sel[c]);
            U.col(c) = src.values.col(it - src.names.begin());
        }
        return pds_estimate(y, {d, {"d1"}}, {U, sel}, empty, linalg::SeMode::iid).alpha(0);
    };
    std::vector<std::string> u1 = s1.step1;
    for (const auto& nme : s1.step2[0])
        if (!std::count(u1.begin(), u1.end(), nme)) u1.push_back(nme);
    CHECK(estimate(Xn, u1) == doctest::Approx(estimate(Xn2, u1)).epsilon(1e-8));
}

TEST_CASE("chs rejects a treatment fully explained by the controls") {
    Rng rng(11);
    const int n = 50, p = 3;
    const Eigen::MatrixXd X = random_matrix(rng, n, p);
    const Eigen::VectorXd d = X.col(1);  // d is literally a control
    const Eigen::VectorXd y = random_vector(rng, n);
    SelectionConfig sc;
    sc.method = tuning::Method::fixed;
    sc.fixed_lambda = 0.0;
    CHECK_THROWS_AS(chs_estimate(centered(y), {centered(d), {"d1"}},
                                 named(X.rowwise() - X.colwise().mean(), "c"),
                                 ChsVariant::post_lasso_orthogonalized, sc,
                                 linalg::SeMode::iid),
                    NumericError);
}

TEST_CASE("treatment listed among controls is rejected") {
    Rng rng(12);
    NamedMatrix D = named(random_matrix(rng, 20, 1), "c");  // name collides
    const auto X = named(random_matrix(rng, 20, 3), "c");
    CHECK_THROWS_AS(
        pds_select(random_vector(rng, 20), D, X, rigorous_config()), UserError);
}
