#include "hdselect/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "hdselect/errors.hpp"
#include "hdselect/kernels.hpp"
#include "hdselect/rng.hpp"
#include "hdselect/threads.hpp"

namespace hdselect::tuning {

std::string method_name(Method m) {
    switch (m) {
        case Method::aic: return "aic";
        case Method::bic: return "bic";
        case Method::ebic: return "ebic";
        case Method::cv: return "cv";
        case Method::rigorous: return "rigorous";
        case Method::fixed: return "fixed";
    }
    return "unknown";
}

TuningResult select_by_ic(const solver::PathResult& path, const Eigen::MatrixXd& X,
                          const Eigen::VectorXd& y, Method criterion, double ebic_xi) {
    if (path.fits.empty()) throw UserError("select_by_ic: empty path");
    const double n = static_cast<double>(X.rows());
    const double p = static_cast<double>(X.cols());
    double per_df;
    switch (criterion) {
        case Method::aic: per_df = 2.0; break;
        case Method::bic: per_df = std::log(n); break;
        case Method::ebic: per_df = std::log(n) + 2.0 * ebic_xi * std::log(p); break;
        default: throw UserError("select_by_ic: criterion must be aic, bic or ebic");
    }

    TuningResult res;
    res.method = criterion;
    double best = std::numeric_limits<double>::infinity();
    // path lambdas are decreasing, so taking strict improvement only gives
    // ties to the larger lambda
    for (const auto& [lambda, fit] : path.fits) {
        double rss = (y - X * fit.coefficients).squaredNorm();
        if (rss < 1e-12) {
            res.notes.push_back("rss floored at 1e-12 for lambda=" + std::to_string(lambda));
            rss = 1e-12;
        }
        const double df = static_cast<double>(fit.active_set.size());
        const double score = n * std::log(rss / n) + per_df * df;
        res.grid_lambdas.push_back(lambda);
        res.scores.push_back(score);
        if (score < best) {
            best = score;
            res.chosen_lambda = lambda;
        }
    }
    res.loadings = Eigen::VectorXd::Ones(X.cols());
    return res;
}

TuningResult kfold_cv(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                      const Eigen::VectorXd& loadings, const CvConfig& config) {
    const int n = static_cast<int>(X.rows());
    const int p = static_cast<int>(X.cols());
    const int k = config.folds;
    if (k < 2 || k > n) throw UserError("kfold_cv: need 2 <= K <= N");

    // common lambda grid from the full standardized data
    Eigen::MatrixXd Xs(n, p);
    Eigen::VectorXd full_mean(p), full_scale(p);
    for (int j = 0; j < p; ++j) {
        const double m = X.col(j).mean();
        double v = (X.col(j).array() - m).square().sum() / n;
        if (v <= 0.0) throw UserError("kfold_cv: constant column " + std::to_string(j));
        full_mean(j) = m;
        full_scale(j) = std::sqrt(v);
        Xs.col(j) = (X.col(j).array() - m) / full_scale(j);
    }
    const Eigen::VectorXd yc = y.array() - y.mean();
    const double lmax = solver::lambda_max(Xs, yc, loadings);
    if (lmax <= 0.0) throw UserError("kfold_cv: lambda_max is zero");
    const int n_points = config.grid.n_points;
    std::vector<double> lambdas(n_points);
    for (int g = 0; g < n_points; ++g) {
        const double t = static_cast<double>(g) / (n_points - 1);
        lambdas[g] = std::exp(std::log(lmax) +
                              t * (std::log(lmax * config.grid.min_ratio) - std::log(lmax)));
    }

    // seeded row shuffle; fold f takes positions f, f+K, f+2K, ...
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(config.seed);
    rng.shuffle(order);
    std::vector<int> fold_of(n);
    for (int i = 0; i < n; ++i) fold_of[order[i]] = i % k;
    for (int f = 0; f < k; ++f)
        if (std::count(fold_of.begin(), fold_of.end(), f) == 0)
            throw UserError("kfold_cv: empty fold");

    std::vector<std::vector<double>> fold_sse(k, std::vector<double>(n_points, 0.0));
    auto run_fold = [&](std::size_t fs) {
        const int f = static_cast<int>(fs);
        std::vector<int> train, test;
        for (int i = 0; i < n; ++i) (fold_of[i] == f ? test : train).push_back(i);

        // training-fold statistics only; held-out rows reuse them
        const int nt = static_cast<int>(train.size());
        Eigen::MatrixXd Xt(nt, p);
        Eigen::VectorXd yt(nt);
        for (int i = 0; i < nt; ++i) {
            Xt.row(i) = X.row(train[i]);
            yt(i) = y(train[i]);
        }
        Eigen::VectorXd mean(p), scale(p);
        for (int j = 0; j < p; ++j) {
            const double m = Xt.col(j).mean();
            double v = (Xt.col(j).array() - m).square().sum() / nt;
            mean(j) = m;
            scale(j) = v > 0.0 ? std::sqrt(v) : 1.0;  // constant in fold: dead column
            Xt.col(j) = (Xt.col(j).array() - m) / scale(j);
            if (v <= 0.0) Xt.col(j).setZero();
        }
        const double ybar = yt.mean();
        yt.array() -= ybar;

        Eigen::VectorXd warm = Eigen::VectorXd::Zero(p);
        for (int g = 0; g < n_points; ++g) {
            const solver::PenaltyConfig penalty{lambdas[g], loadings};
            const solver::LassoFit fit =
                solver::fit_lasso(Xt, yt, penalty, config.tol, config.max_iter, &warm);
            warm = fit.coefficients;
            double sse = 0.0;
            for (int i : test) {
                double pred = ybar;
                for (int j = 0; j < p; ++j)
                    if (fit.coefficients(j) != 0.0)
                        pred += fit.coefficients(j) * (X(i, j) - mean(j)) / scale(j);
                const double e = y(i) - pred;
                sse += e * e;
            }
            fold_sse[f][g] = sse;
        }
    };
    parallel_for(static_cast<std::size_t>(k), worker_count(config.n_threads), run_fold);

    TuningResult res;
    res.method = Method::cv;
    res.grid_lambdas = lambdas;
    res.scores.assign(n_points, 0.0);
    for (int g = 0; g < n_points; ++g) {
        double total = 0.0;
        for (int f = 0; f < k; ++f) total += fold_sse[f][g];  // fixed summation order
        res.scores[g] = total / n;
    }
    double best = std::numeric_limits<double>::infinity();
    for (int g = 0; g < n_points; ++g) {
        if (res.scores[g] < best) {
            best = res.scores[g];
            res.chosen_lambda = lambdas[g];
        }
    }
    res.loadings = loadings;
    return res;
}

namespace {

Eigen::VectorXd compute_loadings(const Eigen::MatrixXd& X, const Eigen::VectorXd& resid,
                                 linalg::SeMode mode,
                                 const std::map<int, std::vector<int>>& clusters) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    const double nd = static_cast<double>(n);
    Eigen::VectorXd psi(p);
    switch (mode) {
        case linalg::SeMode::iid: {
            const double sigma = std::sqrt(resid.squaredNorm() / nd);
            psi.setConstant(sigma);
            break;
        }
        case linalg::SeMode::robust: {
            for (Eigen::Index j = 0; j < p; ++j)
                psi(j) = std::sqrt(
                    kernels::weighted_sumsq(X.col(j).data(), resid.data(),
                                            static_cast<std::size_t>(n)) /
                    nd);
            break;
        }
        case linalg::SeMode::cluster: {
            for (Eigen::Index j = 0; j < p; ++j) {
                double acc = 0.0;
                for (const auto& [id, rows] : clusters) {
                    double s = 0.0;
                    for (int i : rows) s += X(i, j) * resid(i);
                    acc += s * s;
                }
                psi(j) = std::sqrt(acc / nd);
            }
            break;
        }
    }
    return psi;
}

}  // namespace

TuningResult rigorous_lambda(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                             const RigorousConfig& config,
                             const std::vector<int>& cluster_ids) {
    if (X.cols() < 2)
        throw UserError("rigorous_lambda: need at least two penalized columns");
    return detail::rigorous_lambda_impl(X, y, config, cluster_ids);
}

namespace detail {

TuningResult rigorous_lambda_impl(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                                  const RigorousConfig& config,
                                  const std::vector<int>& cluster_ids) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    if (p < 1) throw UserError("rigorous_lambda: empty design");
    if (config.mode == linalg::SeMode::cluster &&
        static_cast<Eigen::Index>(cluster_ids.size()) != n)
        throw UserError("rigorous_lambda: cluster mode requires cluster ids");

    const double nd = static_cast<double>(n);
    const double gamma = config.gamma > 0.0 ? config.gamma : 0.1 / std::log(nd);
    if (gamma / (2.0 * static_cast<double>(p)) >= 1.0)
        throw UserError("rigorous_lambda: gamma too large for this p");
    const double lambda =
        2.0 * config.c * std::sqrt(nd) *
        normal_quantile(1.0 - gamma / (2.0 * static_cast<double>(p)));

    std::map<int, std::vector<int>> clusters;
    if (config.mode == linalg::SeMode::cluster)
        for (Eigen::Index i = 0; i < n; ++i)
            clusters[cluster_ids[i]].push_back(static_cast<int>(i));

    // round 0: residuals from OLS of y on the 5 columns most correlated with y
    const int n_init = static_cast<int>(std::min<Eigen::Index>(5, p));
    std::vector<int> idx(p);
    std::iota(idx.begin(), idx.end(), 0);
    Eigen::VectorXd corr(p);
    for (Eigen::Index j = 0; j < p; ++j)
        corr(j) = std::abs(
            kernels::dot(X.col(j).data(), y.data(), static_cast<std::size_t>(n)));
    std::partial_sort(idx.begin(), idx.begin() + n_init, idx.end(),
                      [&](int a, int b) { return corr(a) > corr(b); });
    Eigen::MatrixXd X0(n, n_init);
    for (int c = 0; c < n_init; ++c) X0.col(c) = X.col(idx[c]);
    Eigen::VectorXd resid = linalg::partial_out(y, X0);
    if (resid.squaredNorm() <= 0.0)
        throw NumericError("rigorous_lambda: all-zero residuals");

    TuningResult res;
    res.method = Method::rigorous;
    res.chosen_lambda = lambda;
    Eigen::VectorXd psi = compute_loadings(X, resid, config.mode, clusters);

    Eigen::VectorXd warm = Eigen::VectorXd::Zero(p);
    int round = 0;
    for (; round < config.max_rounds; ++round) {
        // guard against a degenerate zero loading freezing that column out
        for (Eigen::Index j = 0; j < p; ++j)
            if (psi(j) <= 0.0) psi(j) = 1e-8;
        const solver::PenaltyConfig penalty{lambda, psi};
        const solver::LassoFit fit =
            solver::fit_lasso(X, y, penalty, config.tol, config.max_iter, &warm);
        warm = fit.coefficients;
        resid = y - X * fit.coefficients;
        if (resid.squaredNorm() <= 0.0)
            throw NumericError("rigorous_lambda: all-zero residuals");
        const Eigen::VectorXd next =
            compute_loadings(X, resid, config.mode, clusters);
        double rel = 0.0;
        for (Eigen::Index j = 0; j < p; ++j) {
            const double denom = std::max(std::abs(psi(j)), 1e-12);
            rel = std::max(rel, std::abs(next(j) - psi(j)) / denom);
        }
        psi = next;
        if (rel <= config.loading_tol) {
            ++round;
            break;
        }
    }
    res.iterations = round;
    res.loadings = psi;
    return res;
}

}  // namespace detail

}  // namespace hdselect::tuning
