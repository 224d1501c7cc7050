#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "hdselect/dataset.hpp"
#include "hdselect/errors.hpp"
#include "hdselect/solver.hpp"
#include "hdselect/rng.hpp"

using namespace hdselect;

namespace {

std::string write_temp(const std::string& content) {
    static int counter = 0;
    std::string path = "hdselect_test_" + std::to_string(counter++) + ".csv";
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load_csv parses a plain file") {
    const auto path = write_temp("a,b\n1,2\n3,4\n5,6\n");
    const Dataset ds = load_csv(path);
    CHECK(ds.n_rows() == 3);
    CHECK(ds.names() == std::vector<std::string>{"a", "b"});
    CHECK(ds.column("a") == std::vector<double>{1, 3, 5});
    CHECK(ds.column("b") == std::vector<double>{2, 4, 6});
    std::remove(path.c_str());
}

TEST_CASE("load_csv rejects duplicate headers") {
    const auto path = write_temp("a,a\n1,2\n");
    CHECK_THROWS_AS(load_csv(path), UserError);
    std::remove(path.c_str());
}

TEST_CASE("load_csv rejects ragged rows with the line number") {
    const auto path = write_temp("a,b\n1,2\n3\n");
    try {
        load_csv(path);
        FAIL("expected error");
    } catch (const UserError& e) {
        CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("load_csv flags a stray token in a numeric column with coordinates") {
    const auto path = write_temp("a,b\n1,2\nx,4\n");
    try {
        load_csv(path);
        FAIL("expected error");
    } catch (const UserError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("'a'") != std::string::npos);
    }
    std::remove(path.c_str());
}

TEST_CASE("NA markers become missing values; listwise deletion removes the row") {
    const auto path = write_temp("a,b\n1,2\nNA,4\n5,6\n");
    Dataset ds = load_csv(path);
    CHECK(std::isnan(ds.column("a")[1]));
    const std::size_t dropped = ds.drop_missing({"a", "b"});
    CHECK(dropped == 1);
    CHECK(ds.n_rows() == 2);
    CHECK(ds.column("a") == std::vector<double>{1, 5});
    std::remove(path.c_str());
}

TEST_CASE("quoted fields, embedded delimiters and custom delimiter") {
    const auto path = write_temp("a;b\n\"1\";\"te;xt\"\n2;other\n");
    CsvOptions opt;
    opt.delimiter = ';';
    const Dataset ds = load_csv(path, opt);
    CHECK(ds.n_rows() == 2);
    CHECK(ds.is_categorical("b"));
    CHECK(ds.levels("b") == std::vector<std::string>{"other", "te;xt"});
    std::remove(path.c_str());
}

TEST_CASE("one-hot full encoding: dummies sum to one per row") {
    Dataset ds;
    ds.add_categorical("g", {0, 1, 0, 1}, {"F", "M"});
    ds.add_column("y", {1, 2, 3, 4});
    const Dataset enc = one_hot_encode(ds, "g", false);
    CHECK(enc.has_column("g_F"));
    CHECK(enc.has_column("g_M"));
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(enc.column("g_F")[i] + enc.column("g_M")[i] == 1.0);
}

TEST_CASE("one-hot with drop_reference drops the lexicographically first level") {
    Dataset ds;
    ds.add_categorical("g", {0, 1, 0, 1}, {"F", "M"});
    const Dataset enc = one_hot_encode(ds, "g", true);
    CHECK(!enc.has_column("g_F"));
    CHECK(enc.column("g_M") == std::vector<double>{0, 1, 0, 1});
}

TEST_CASE("one-hot errors: constant column and name collision") {
    Dataset ds;
    ds.add_categorical("g", {0, 0}, {"x"});
    CHECK_THROWS_AS(one_hot_encode(ds, "g", false), UserError);

    Dataset ds2;
    ds2.add_categorical("g", {0, 1}, {"a", "b"});
    ds2.add_column("g_a", {9, 9});
    CHECK_THROWS_AS(one_hot_encode(ds2, "g", false), UserError);
}

TEST_CASE("full-dummy collinear block: lasso fits and matches the k-1 encoding fit") {
    // three levels fed as penalized controls; the solver inactivates at least
    // one of the perfectly collinear set and fitted values agree with the
    // reference-dropped encoding
    Rng rng(11);
    const int n = 60;
    Dataset ds;
    std::vector<double> codes(n), y(n);
    for (int i = 0; i < n; ++i) {
        codes[i] = static_cast<double>(i % 3);
        y[i] = 0.8 * (codes[i] == 1) - 0.4 * (codes[i] == 2) + 0.1 * rng.normal();
    }
    ds.add_categorical("g", codes, {"a", "b", "c"});
    ds.add_column("y", y);

    const Dataset full = one_hot_encode(ds, "g", false);
    const Dataset ref = one_hot_encode(ds, "g", true);

    auto fit_on = [&](const Dataset& d, const std::vector<std::string>& cols) {
        auto std_res = standardize(d, cols, {}, {"y"});
        const Eigen::MatrixXd X = std_res.data.matrix(cols);
        Eigen::VectorXd yv =
            Eigen::Map<const Eigen::VectorXd>(std_res.data.column("y").data(), n);
        const double lambda = 1.0;
        const auto fit = solver::fit_lasso(
            X, yv, {lambda, Eigen::VectorXd::Ones(X.cols())});
        return std::make_pair(fit, Eigen::VectorXd(X * fit.coefficients));
    };
    const auto [fit_full, pred_full] = fit_on(full, {"g_a", "g_b", "g_c"});
    const auto [fit_ref, pred_ref] = fit_on(ref, {"g_b", "g_c"});
    CHECK(fit_full.converged);
    CHECK(fit_full.active_set.size() <= 2);  // at least one dummy inactivated
    CHECK((pred_full - pred_ref).lpNorm<Eigen::Infinity>() < 0.05);
}

TEST_CASE("standardize: divisor N gives sum of squares exactly N") {
    Dataset ds;
    ds.add_column("x", {1, 2, 3});
    ds.add_column("y", {2, 4, 9});
    const auto res = standardize(ds, {"x"}, {}, {"y"});
    const auto& x = res.data.column("x");
    double mean = 0.0, ss = 0.0;
    for (double v : x) mean += v;
    for (double v : x) ss += v * v;
    CHECK(std::abs(mean) < 1e-14);
    CHECK(std::abs(ss - 3.0) < 1e-12);
    // dependent centered only
    const auto& y = res.data.column("y");
    CHECK(std::abs(y[0] + 3.0) < 1e-12);
    CHECK(res.record.find("y")->flag == ScaleFlag::centered);
    CHECK(res.record.find("y")->mean == 5.0);
}

TEST_CASE("standardize is idempotent up to 1e-12") {
    Dataset ds;
    ds.add_column("x", {1, 2, 3, 4, 7});
    const auto once = standardize(ds, {"x"});
    const auto twice = standardize(once.data, {"x"});
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(std::abs(once.data.column("x")[i] - twice.data.column("x")[i]) < 1e-12);
}

TEST_CASE("standardize: constant column handling by role") {
    Dataset ds;
    ds.add_column("c", {5, 5, 5});
    ds.add_column("x", {1, 2, 3});
    // penalized constant: error naming the column
    try {
        standardize(ds, {"c", "x"});
        FAIL("expected error");
    } catch (const UserError& e) {
        CHECK(std::string(e.what()).find("'c'") != std::string::npos);
    }
    // unpenalized constant: dropped with a warning entry
    const auto res = standardize(ds, {"x"}, {"c"});
    CHECK(res.dropped_constant == std::vector<std::string>{"c"});
}

TEST_CASE("destandardize closed forms") {
    Dataset ds;
    ds.add_column("x", {0, 2, 4});  // mean 2, sd sqrt(8/3)
    ds.add_column("y", {1, 2, 6});
    const auto res = standardize(ds, {"x"}, {}, {"y"});

    // all-zero coefficients: intercept is mean(y)
    const auto zero = destandardize(Eigen::VectorXd::Zero(1), {"x"}, res.record, "y");
    CHECK(zero.coefficients[0] == 0.0);
    CHECK(zero.intercept == doctest::Approx(3.0).epsilon(1e-12));

    // single column, scale 2, standardized coef 1 -> original coef 0.5
    StandardizationRecord rec;
    rec.entries.push_back({"y", 0.0, 1.0, ScaleFlag::centered});
    rec.entries.push_back({"x", 0.0, 2.0, ScaleFlag::standardized});
    Eigen::VectorXd one(1);
    one << 1.0;
    const auto unit = destandardize(one, {"x"}, rec, "y");
    CHECK(unit.coefficients[0] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("round-trip: standardized fit predicts identically in original units") {
    Rng rng(3);
    const int n = 30, p = 5;
    Dataset ds;
    std::vector<std::string> names;
    for (int j = 0; j < p; ++j) {
        std::vector<double> col(n);
        for (int i = 0; i < n; ++i) col[i] = 3.0 * rng.normal() + j;
        names.push_back("x" + std::to_string(j + 1));
        ds.add_column(names.back(), col);
    }
    std::vector<double> y(n);
    for (int i = 0; i < n; ++i)
        y[i] = 1.5 + 0.7 * ds.column("x1")[i] - 0.2 * ds.column("x3")[i] + rng.normal();
    ds.add_column("y", y);

    const auto res = standardize(ds, names, {}, {"y"});
    const Eigen::MatrixXd Xs = res.data.matrix(names);
    const Eigen::VectorXd ys =
        Eigen::Map<const Eigen::VectorXd>(res.data.column("y").data(), n);
    const auto fit = solver::fit_lasso(Xs, ys, {0.8, Eigen::VectorXd::Ones(p)});
    const auto orig = destandardize(fit.coefficients, names, res.record, "y");

    const Eigen::MatrixXd Xraw = ds.matrix(names);
    for (int i = 0; i < n; ++i) {
        double pred_orig = orig.intercept;
        for (int j = 0; j < p; ++j) pred_orig += orig.coefficients[j] * Xraw(i, j);
        const double pred_std =
            ds.column("y")[i] - ys(i) + Xs.row(i).dot(fit.coefficients);
        CHECK(std::abs(pred_orig - pred_std) < 1e-10);
    }
}

TEST_CASE("dataset invariants: unequal lengths and unknown columns") {
    Dataset ds;
    ds.add_column("a", {1, 2});
    CHECK_THROWS_AS(ds.add_column("b", {1, 2, 3}), UserError);
    CHECK_THROWS_AS(ds.column("zzz"), UserError);
    CHECK_THROWS_AS(ds.add_column("a", {3, 4}), UserError);
}

TEST_CASE("model spec validation") {
    Dataset ds;
    for (const char* name : {"y", "d", "x1", "c1", "c2", "z1"})
        ds.add_column(name, {1, 2, 3});

    ModelSpec ok;
    ok.dependent = "y";
    ok.treatments = {"d"};
    ok.hd_controls_penalized = {"c1", "c2"};
    CHECK_NOTHROW(ok.validate(ds, true));

    ModelSpec overlap = ok;
    overlap.hd_controls_penalized = {"d", "c1"};
    CHECK_THROWS_AS(overlap.validate(ds, true), UserError);

    ModelSpec dep_reused = ok;
    dep_reused.hd_controls_penalized = {"y"};
    CHECK_THROWS_AS(dep_reused.validate(ds, true), UserError);

    ModelSpec endog_no_inst = ok;
    endog_no_inst.endogenous = {"d"};
    CHECK_THROWS_AS(endog_no_inst.validate(ds, true), UserError);

    ModelSpec no_unpen;
    no_unpen.dependent = "y";
    no_unpen.hd_controls_penalized = {"c1"};
    CHECK_THROWS_AS(no_unpen.validate(ds, true), UserError);
    CHECK_NOTHROW(no_unpen.validate(ds, false));
}
