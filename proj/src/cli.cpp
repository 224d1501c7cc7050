#include "hdselect/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hdselect/errors.hpp"
#include "hdselect/inference.hpp"
#include "hdselect/ivhds.hpp"
#include "hdselect/kernels.hpp"
#include "hdselect/linalg.hpp"
#include "hdselect/panelfx.hpp"
#include "hdselect/postsel.hpp"
#include "hdselect/rng.hpp"
#include "hdselect/threads.hpp"
#include "hdselect/tuning.hpp"

namespace hdselect::cli {

using nlohmann::ordered_json;

namespace {

bool glob_match(const std::string& pattern, const std::string& name) {
    // '*' matches any run of characters; no other metacharacters
    std::size_t p = 0, s = 0, star = std::string::npos, mark = 0;
    while (s < name.size()) {
        if (p < pattern.size() && (pattern[p] == name[s])) {
            ++p;
            ++s;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = s;
        } else if (star != std::string::npos) {
            p = star + 1;
            s = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

}  // namespace

std::vector<std::string> expand_tokens(const std::vector<std::string>& tokens,
                                       const std::vector<std::string>& header) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    auto push = [&](const std::string& name) {
        if (seen.insert(name).second) out.push_back(name);
    };
    std::set<std::string> header_set(header.begin(), header.end());

    for (const auto& tok : tokens) {
        if (tok.find('*') != std::string::npos) {
            bool any = false;
            for (const auto& name : header)
                if (glob_match(tok, name)) {
                    push(name);
                    any = true;
                }
            if (!any) throw UserError("model: glob '" + tok + "' matches no column");
            continue;
        }
        if (header_set.count(tok)) {
            push(tok);
            continue;
        }
        const auto dash = tok.find('-');
        if (dash != std::string::npos && dash > 0 && dash + 1 < tok.size()) {
            const std::string lo = tok.substr(0, dash);
            const std::string hi = tok.substr(dash + 1);
            const auto lo_it = std::find(header.begin(), header.end(), lo);
            const auto hi_it = std::find(header.begin(), header.end(), hi);
            if (lo_it == header.end() || hi_it == header.end())
                throw UserError("model: range '" + tok +
                                "' has an endpoint that is not a column");
            if (hi_it < lo_it)
                throw UserError("model: range '" + tok + "' endpoints out of header order");
            for (auto it = lo_it; it <= hi_it; ++it) push(*it);
            continue;
        }
        throw UserError("model: unknown column '" + tok + "'");
    }
    return out;
}

ModelSpec parse_model(const std::string& model, const std::vector<std::string>& header) {
    // lexer: names, '(', ')', '='
    std::vector<std::string> raw;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            raw.push_back(cur);
            cur.clear();
        }
    };
    for (char ch : model) {
        if (ch == '(' || ch == ')' || ch == '=') {
            flush();
            raw.emplace_back(1, ch);
        } else if (std::isspace(static_cast<unsigned char>(ch))) {
            flush();
        } else {
            cur.push_back(ch);
        }
    }
    flush();
    if (raw.empty()) throw UserError("model: empty model string");

    std::vector<std::string> bare;
    std::vector<std::string> penalized_tokens;
    std::vector<std::string> endog_tokens, instrument_tokens;
    bool saw_penalized_group = false, saw_iv_group = false;

    std::size_t i = 0;
    while (i < raw.size()) {
        if (raw[i] == ")" || raw[i] == "=")
            throw UserError("model: unexpected '" + raw[i] + "'");
        if (raw[i] != "(") {
            bare.push_back(raw[i++]);
            continue;
        }
        // collect one parenthesized group
        ++i;
        std::vector<std::string> left, right;
        bool after_eq = false;
        for (; i < raw.size() && raw[i] != ")"; ++i) {
            if (raw[i] == "=") {
                if (after_eq) throw UserError("model: multiple '=' in one group");
                after_eq = true;
            } else if (raw[i] == "(") {
                throw UserError("model: nested parentheses");
            } else {
                (after_eq ? right : left).push_back(raw[i]);
            }
        }
        if (i == raw.size()) throw UserError("model: unbalanced parentheses");
        ++i;  // consume ')'
        if (after_eq) {
            if (saw_iv_group)
                throw UserError("model: only one (endogenous = instruments) group allowed");
            if (left.empty() || right.empty())
                throw UserError("model: (endogenous = instruments) group needs both sides");
            saw_iv_group = true;
            endog_tokens = left;
            instrument_tokens = right;
        } else {
            if (saw_penalized_group)
                throw UserError("model: only one penalized group allowed");
            if (left.empty()) throw UserError("model: empty penalized group");
            saw_penalized_group = true;
            penalized_tokens = left;
        }
    }
    if (bare.empty()) throw UserError("model: dependent variable missing");

    ModelSpec spec;
    spec.dependent = bare.front();
    if (std::find(header.begin(), header.end(), spec.dependent) == header.end())
        throw UserError("model: unknown column '" + spec.dependent + "'");
    const std::vector<std::string> others(bare.begin() + 1, bare.end());
    spec.treatments = expand_tokens(others, header);
    spec.endogenous = expand_tokens(endog_tokens, header);
    // endogenous variables are treatments of interest too, listed first
    std::vector<std::string> t = spec.endogenous;
    for (const auto& name : spec.treatments)
        if (!std::count(t.begin(), t.end(), name)) t.push_back(name);
    spec.treatments = std::move(t);
    spec.hd_controls_penalized = expand_tokens(penalized_tokens, header);
    spec.instruments_penalized = expand_tokens(instrument_tokens, header);
    return spec;
}

namespace {

struct Pipeline {
    const RunConfig& config;
    Dataset ds;
    ModelSpec spec;
    std::size_t n_loaded = 0;
    std::size_t n_dropped = 0;
    int fe_groups = 0;
    std::vector<std::string> warnings;
    ordered_json report;

    explicit Pipeline(const RunConfig& cfg) : config(cfg) {}

    linalg::SeMode se_mode() const {
        if (!config.cluster.empty()) return linalg::SeMode::cluster;
        if (config.robust) return linalg::SeMode::robust;
        return linalg::SeMode::iid;
    }

    linalg::SeMode loading_mode() const {
        // rigorous loadings default to heteroskedasticity-robust; cluster
        // data upgrades them to cluster-robust
        return config.cluster.empty() ? linalg::SeMode::robust : linalg::SeMode::cluster;
    }

    std::vector<int> cluster_ids() const {
        std::vector<int> ids;
        if (config.cluster.empty()) return ids;
        const auto& v = ds.column(config.cluster);
        std::map<double, int> code;
        for (double x : v) code.emplace(x, 0);
        int next = 0;
        for (auto& [val, c] : code) c = next++;
        ids.reserve(v.size());
        for (double x : v) ids.push_back(code.at(x));
        return ids;
    }

    tuning::Method tune_method() const {
        if (config.lambda >= 0.0) return tuning::Method::fixed;
        const std::string& t = config.tune;
        if (t.empty() || t == "rigorous") return tuning::Method::rigorous;
        if (t == "cv") return tuning::Method::cv;
        if (t == "aic") return tuning::Method::aic;
        if (t == "bic") return tuning::Method::bic;
        if (t == "ebic") return tuning::Method::ebic;
        throw UserError("unknown --tune method: " + t);
    }

    inference::SelectionConfig selection_config() const {
        inference::SelectionConfig sc;
        sc.method = tune_method();
        sc.rigorous.mode = loading_mode();
        sc.cv.folds = config.folds;
        sc.cv.seed = config.seed;
        sc.cv.grid = config.grid;
        sc.grid = config.grid;
        sc.fixed_lambda = config.lambda;
        sc.n_threads = config.threads;
        sc.cluster_ids = cluster_ids();
        return sc;
    }

    void load_and_resolve() {
        ds = load_csv(config.data_path, config.csv);
        n_loaded = ds.n_rows();
        spec = parse_model(config.model, ds.names());

        // role flags
        const auto pnotpen = expand_tokens(config.pnotpen, ds.names());
        spec.amelioration_set = expand_tokens(config.aset, ds.names());
        spec.partial_out = expand_tokens(config.partial, ds.names());
        for (const auto& name : pnotpen) {
            auto& pen = spec.hd_controls_penalized;
            auto& inst = spec.instruments_penalized;
            if (auto it = std::find(inst.begin(), inst.end(), name); it != inst.end()) {
                inst.erase(it);
                spec.instruments_unpenalized.push_back(name);
            } else if (auto jt = std::find(pen.begin(), pen.end(), name); jt != pen.end()) {
                pen.erase(jt);
                spec.focal_unpenalized.push_back(name);
            } else if (!spec.endogenous.empty()) {
                // bare pnotpen name in an IV model: an unpenalized instrument
                spec.instruments_unpenalized.push_back(name);
            } else {
                spec.focal_unpenalized.push_back(name);
            }
        }
        spec.options.robust = config.robust;
        if (!config.cluster.empty()) spec.options.cluster = config.cluster;
        spec.options.fe = config.fe;
        spec.options.seed = config.seed;
        if (!config.panel.empty()) ds.panel_id = config.panel;
        if (!config.time.empty()) ds.time_id = config.time;
        if (!config.cluster.empty()) ds.cluster_id = config.cluster;

        if (ds.is_categorical(spec.dependent))
            throw UserError("dependent variable '" + spec.dependent + "' is categorical");
        for (const auto& name : spec.treatments)
            if (ds.is_categorical(name))
                throw UserError("treatment '" + name +
                                "' is categorical; one-hot encode to dummies first");

        expand_categoricals();

        const bool inferential = config.subcommand == "pds" || config.subcommand == "chs" ||
                                 config.subcommand == "ivlasso";
        spec.validate(ds, inferential);
        if (!inferential && !spec.endogenous.empty())
            throw UserError("subcommand '" + config.subcommand +
                            "' does not accept endogenous variables; use ivlasso");
        if ((config.subcommand == "pds" || config.subcommand == "chs") &&
            !spec.endogenous.empty())
            throw UserError("endogenous variables require the ivlasso subcommand");

        // listwise deletion over every referenced column
        std::vector<std::string> used = spec.all_columns();
        if (config.fe) {
            if (config.panel.empty()) throw UserError("--fe requires --panel");
            used.push_back(config.panel);
        }
        if (!config.time.empty()) used.push_back(config.time);
        n_dropped = ds.drop_missing(used);
        if (ds.n_rows() == 0) throw UserError("no rows left after listwise deletion");

        if (config.fe) apply_within();
    }

    // penalized categorical columns expand to the full dummy set (the lasso
    // handles the collinearity); unpenalized positions drop the reference
    // level to avoid the dummy trap
    void expand_categoricals() {
        auto expand_list = [&](std::vector<std::string>& list, bool drop_reference) {
            std::vector<std::string> out;
            for (const auto& name : list) {
                if (!ds.is_categorical(name)) {
                    out.push_back(name);
                    continue;
                }
                const auto levels = ds.levels(name);
                ds = one_hot_encode(ds, name, drop_reference);
                for (std::size_t l = drop_reference ? 1 : 0; l < levels.size(); ++l)
                    out.push_back(name + "_" + levels[l]);
            }
            list = out;
        };
        expand_list(spec.hd_controls_penalized, false);
        expand_list(spec.auxiliary_penalized, false);
        expand_list(spec.instruments_penalized, false);
        expand_list(spec.focal_unpenalized, true);
        expand_list(spec.instruments_unpenalized, true);
        expand_list(spec.amelioration_set, true);
        expand_list(spec.partial_out, true);
    }

    void apply_within() {
        const panelfx::PanelIndex index =
            panelfx::make_panel_index(ds, config.panel, config.time);
        fe_groups = index.n_groups();
        std::vector<std::string> cols{spec.dependent};
        for (const auto* list :
             {&spec.treatments, &spec.focal_unpenalized, &spec.auxiliary_penalized,
              &spec.hd_controls_penalized, &spec.instruments_penalized,
              &spec.instruments_unpenalized, &spec.amelioration_set, &spec.partial_out})
            cols.insert(cols.end(), list->begin(), list->end());
        panelfx::WithinResult res = panelfx::within_transform(ds, index, cols);
        ds = std::move(res.data);
        for (auto& w : res.warnings) warnings.push_back(w);
    }

    inference::NamedMatrix named(const std::vector<std::string>& cols) const {
        return {ds.matrix(cols), cols};
    }

    Eigen::VectorXd yvec() const {
        const auto& v = ds.column(spec.dependent);
        return Eigen::Map<const Eigen::VectorXd>(v.data(), v.size());
    }

    // ---- report assembly -------------------------------------------------

    void header_json() {
        report["schema_version"] = kSchemaVersion;
        report["tool"] = {{"name", "hdselect"},
                          {"version", kToolVersion},
                          {"kernels", kernels::isa_name(kernels::active_isa())}};
        ordered_json cmd;
        cmd["subcommand"] = config.subcommand;
        cmd["model"] = config.model;
        cmd["seed"] = config.seed;
        ordered_json opts;
        opts["robust"] = config.robust;
        opts["cluster"] = config.cluster;
        opts["fe"] = config.fe;
        opts["tune"] = config.lambda >= 0.0 ? "fixed" : (config.tune.empty() ? "rigorous"
                                                                             : config.tune);
        if (config.lambda >= 0.0) opts["lambda"] = config.lambda;
        if (!config.post.empty()) opts["post"] = config.post;
        if (config.subcommand == "ivlasso") opts["first_stage"] = config.first_stage;
        opts["folds"] = config.folds;
        cmd["options"] = opts;
        report["command"] = cmd;
        ordered_json data;
        data["path"] = config.data_path;
        data["n_rows_loaded"] = n_loaded;
        data["n_dropped_missing"] = n_dropped;
        data["n_used"] = ds.n_rows();
        if (config.fe) data["fe_groups"] = fe_groups;
        report["data"] = data;
        ordered_json model;
        model["dependent"] = spec.dependent;
        model["treatments"] = spec.treatments;
        model["endogenous"] = spec.endogenous;
        model["unpenalized"] = spec.focal_unpenalized;
        model["penalized"] = spec.penalized();
        model["instruments_penalized"] = spec.instruments_penalized;
        model["instruments_unpenalized"] = spec.instruments_unpenalized;
        model["amelioration_set"] = spec.amelioration_set;
        model["partial_out"] = spec.partial_out;
        report["model"] = model;
    }

    static ordered_json estimate_row(const std::string& name, double coef, double se) {
        const double z = normal_quantile(0.975);
        ordered_json row;
        row["name"] = name;
        row["coef"] = coef;
        row["se"] = se;
        row["t"] = se > 0.0 ? coef / se : 0.0;
        row["ci_lower"] = coef - z * se;
        row["ci_upper"] = coef + z * se;
        return row;
    }

    void finish(RunReport& out) {
        report["warnings"] = warnings;
        out.json = report;
        out.exit_code = 0;
    }
};

// deterministic union preserving the hd-control column order, then aset
std::vector<std::string> union_names(const std::vector<std::string>& order,
                                     const std::vector<std::vector<std::string>>& sets,
                                     const std::vector<std::string>& aset) {
    std::set<std::string> members;
    for (const auto& s : sets) members.insert(s.begin(), s.end());
    std::vector<std::string> out;
    for (const auto& name : order)
        if (members.count(name)) out.push_back(name);
    for (const auto& name : aset)
        if (!members.count(name)) out.push_back(name);
    return out;
}

ordered_json loadings_json(const Eigen::VectorXd& psi, const std::vector<std::string>& names,
                           bool full) {
    ordered_json out;
    if (psi.size() == 0) return out;
    std::vector<double> v(psi.data(), psi.data() + psi.size());
    std::sort(v.begin(), v.end());
    out["min"] = v.front();
    out["median"] = v[v.size() / 2];
    out["max"] = v.back();
    if (full && names.size() == static_cast<std::size_t>(psi.size())) {
        ordered_json values;
        for (Eigen::Index j = 0; j < psi.size(); ++j) values[names[j]] = psi(j);
        out["values"] = values;
    }
    return out;
}

std::string tsv_from_estimates(const ordered_json& rows) {
    std::ostringstream os;
    os << "name\tcoef\tse\tt\tci_lower\tci_upper\n";
    for (const auto& r : rows) {
        os << r["name"].get<std::string>() << '\t' << r["coef"].dump() << '\t'
           << r["se"].dump() << '\t' << r["t"].dump() << '\t' << r["ci_lower"].dump()
           << '\t' << r["ci_upper"].dump() << '\n';
    }
    return os.str();
}

// ---- penalized-regression subcommands (lasso / ridge / path) -------------

RunReport run_penalized(Pipeline& pl) {
    const RunConfig& config = pl.config;
    const ModelSpec& spec = pl.spec;
    const std::vector<std::string> penalized = spec.penalized();
    std::vector<std::string> unpen = spec.treatments;  // bare names: unpenalized here
    unpen.insert(unpen.end(), spec.focal_unpenalized.begin(), spec.focal_unpenalized.end());
    unpen.insert(unpen.end(), spec.partial_out.begin(), spec.partial_out.end());
    if (penalized.empty()) throw UserError(config.subcommand + ": no penalized columns");

    StandardizeResult std_res = standardize(pl.ds, penalized, unpen, {spec.dependent});
    for (const auto& name : std_res.dropped_constant)
        pl.warnings.push_back("constant unpenalized column dropped: " + name);
    std::vector<std::string> unpen_kept;
    for (const auto& name : unpen)
        if (!std::count(std_res.dropped_constant.begin(), std_res.dropped_constant.end(),
                        name))
            unpen_kept.push_back(name);

    const Eigen::VectorXd y = [&] {
        const auto& v = std_res.data.column(spec.dependent);
        return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(v.data(), v.size()));
    }();
    const Eigen::MatrixXd Xpen = std_res.data.matrix(penalized);
    const Eigen::MatrixXd Xunp = std_res.data.matrix(unpen_kept);

    // tuning happens on the penalized block with unpenalized columns
    // partialled out (they are exactly unpenalized in the final fit)
    const Eigen::VectorXd y_t = linalg::partial_out(y, Xunp);
    const Eigen::MatrixXd Xpen_t = linalg::partial_out(Xpen, Xunp);

    double lambda = 0.0;
    Eigen::VectorXd loadings = Eigen::VectorXd::Ones(Xpen.cols());
    tuning::TuningResult tun;
    const tuning::Method method = pl.tune_method();
    switch (method) {
        case tuning::Method::fixed:
            lambda = config.lambda;
            tun.method = tuning::Method::fixed;
            break;
        case tuning::Method::rigorous: {
            if (config.subcommand == "ridge")
                throw UserError("ridge: pass --lambda (rigorous tuning is lasso-only)");
            tuning::RigorousConfig rc;
            rc.mode = pl.loading_mode();
            tun = tuning::rigorous_lambda(Xpen_t, y_t, rc, pl.cluster_ids());
            lambda = tun.chosen_lambda;
            loadings = tun.loadings;
            break;
        }
        case tuning::Method::cv: {
            tuning::CvConfig cc;
            cc.folds = config.folds;
            cc.seed = config.seed;
            cc.grid = config.grid;
            cc.n_threads = config.threads;
            tun = tuning::kfold_cv(Xpen_t, y_t, loadings, cc);
            lambda = tun.chosen_lambda;
            break;
        }
        default: {
            const solver::PathResult path =
                solver::regularization_path(Xpen_t, y_t, loadings, config.grid);
            tun = tuning::select_by_ic(path, Xpen_t, y_t, method);
            lambda = tun.chosen_lambda;
            break;
        }
    }

    // full design: unpenalized columns ride along with loading 0
    const Eigen::Index p_u = Xunp.cols();
    const Eigen::Index p_p = Xpen.cols();
    Eigen::MatrixXd X(pl.ds.n_rows(), p_u + p_p);
    if (p_u > 0) X.leftCols(p_u) = Xunp;
    X.rightCols(p_p) = Xpen;
    Eigen::VectorXd psi(p_u + p_p);
    psi.head(p_u).setZero();
    psi.tail(p_p) = loadings;
    std::vector<std::string> names = unpen_kept;
    names.insert(names.end(), penalized.begin(), penalized.end());

    pl.header_json();
    ordered_json& rep = pl.report;
    ordered_json tuning_json;
    tuning_json["method"] = tuning::method_name(method);
    tuning_json["lambda"] = lambda;
    tuning_json["loadings"] = loadings_json(loadings, penalized, config.full);
    if (tun.iterations > 0) tuning_json["loading_rounds"] = tun.iterations;

    RunReport out;
    if (config.subcommand == "path") {
        const solver::PathResult path =
            solver::regularization_path(Xpen_t, y_t, Eigen::VectorXd::Ones(p_p), config.grid);
        ordered_json points = ordered_json::array();
        std::ostringstream tsv;
        tsv << "lambda\tdf\tl1_norm\trss\n";
        for (const auto& [lam, fit] : path.fits) {
            ordered_json pt;
            pt["lambda"] = lam;
            pt["df"] = fit.active_set.size();
            pt["l1_norm"] = fit.coefficients.lpNorm<1>();
            const double rss = (y_t - Xpen_t * fit.coefficients).squaredNorm();
            pt["rss"] = rss;
            if (config.full) {
                ordered_json coefs;
                for (int j : fit.active_set) coefs[penalized[j]] = fit.coefficients(j);
                pt["coefficients"] = coefs;
            }
            points.push_back(pt);
            tsv << lam << '\t' << fit.active_set.size() << '\t'
                << fit.coefficients.lpNorm<1>() << '\t' << rss << '\n';
        }
        rep["path"] = points;
        rep["lambda_max"] = path.lambda_max;
        pl.finish(out);
        out.tsv = tsv.str();
        return out;
    }

    Eigen::VectorXd coefs;
    ordered_json diag;
    if (config.subcommand == "ridge") {
        coefs = solver::fit_ridge(X, y, {lambda, psi});
        diag["estimator"] = "ridge";
    } else {
        const solver::LassoFit fit = solver::fit_lasso(X, y, {lambda, psi});
        coefs = fit.coefficients;
        diag["estimator"] = "lasso";
        diag["iterations"] = fit.iterations;
        diag["converged"] = fit.converged;
        diag["kkt_violation"] = fit.kkt_violation;
        diag["objective"] = fit.objective;
    }

    const OriginalScaleFit orig =
        destandardize(coefs, names, std_res.record, spec.dependent);
    const int s = solver::sparsity_index(coefs.tail(p_p));
    rep["tuning"] = tuning_json;
    ordered_json sel;
    std::vector<std::string> active_names;
    for (Eigen::Index j = p_u; j < coefs.size(); ++j)
        if (coefs(j) != 0.0) active_names.push_back(names[j]);
    sel["active_set"] = active_names;
    sel["sparsity_index"] = s;
    sel["sparse_solution"] = solver::is_sparse_solution(
        s, static_cast<int>(p_p), static_cast<int>(pl.ds.n_rows()));
    rep["selection"] = sel;

    ordered_json table = ordered_json::array();
    std::ostringstream tsv;
    tsv << "name\tcoef\n";
    if (!config.fe) {
        ordered_json row;
        row["name"] = "_cons";
        row["coef"] = orig.intercept;
        table.push_back(row);
        tsv << "_cons\t" << orig.intercept << '\n';
    }
    for (std::size_t j = 0; j < names.size(); ++j) {
        const bool is_pen = static_cast<Eigen::Index>(j) >= p_u;
        if (is_pen && coefs(j) == 0.0 && !config.full) continue;
        ordered_json row;
        row["name"] = names[j];
        row["coef"] = orig.coefficients[j];
        row["penalized"] = is_pen;
        table.push_back(row);
        tsv << names[j] << '\t' << orig.coefficients[j] << '\n';
    }
    rep["coefficients"] = table;
    rep["diagnostics"] = diag;
    pl.finish(out);
    out.tsv = tsv.str();
    return out;
}

// ---- pds / chs ------------------------------------------------------------

RunReport run_inference(Pipeline& pl) {
    const RunConfig& config = pl.config;
    const ModelSpec& spec = pl.spec;
    std::string estimator = config.post;
    if (estimator.empty()) estimator = config.subcommand == "chs" ? "chs-post" : "pds";
    if (estimator != "pds" && estimator != "chs-lasso" && estimator != "chs-post")
        throw UserError("--post must be pds, chs-lasso or chs-post");

    const Eigen::VectorXd y = pl.yvec();
    const auto D = pl.named(spec.treatments);
    const auto X_hd = pl.named(spec.penalized());
    std::vector<std::string> unpen_names = spec.focal_unpenalized;
    unpen_names.insert(unpen_names.end(), spec.partial_out.begin(), spec.partial_out.end());
    const auto W = pl.named(unpen_names);

    // projection block for the selection steps: intercept + unpenalized
    Eigen::MatrixXd P(pl.ds.n_rows(), W.cols() + 1);
    P.col(0).setOnes();
    if (W.cols() > 0) P.rightCols(W.cols()) = W.values;
    const Eigen::VectorXd y_sel = linalg::partial_out(y, P);
    inference::NamedMatrix D_sel{linalg::partial_out(D.values, P), D.names};
    inference::NamedMatrix X_sel{linalg::partial_out(X_hd.values, P), X_hd.names};

    const inference::SelectionConfig sc = pl.selection_config();
    const std::vector<int> cids = pl.cluster_ids();
    const linalg::SeMode se = pl.se_mode();
    const int dof_absorbed = config.fe ? pl.fe_groups : 0;

    pl.header_json();
    ordered_json& rep = pl.report;
    RunReport out;

    if (estimator == "pds") {
        const inference::PdsSelection sel = inference::pds_select(y_sel, D_sel, X_sel, sc);
        const std::vector<std::string> union_ctl = union_names(
            X_hd.names,
            [&] {
                std::vector<std::vector<std::string>> sets{sel.step1};
                for (const auto& s : sel.step2) sets.push_back(s);
                return sets;
            }(),
            spec.amelioration_set);
        inference::PDSResult res =
            inference::pds_estimate(y, D, pl.named(union_ctl), W, se, cids,
                                    /*intercept=*/!config.fe, dof_absorbed);
        res.selected_step1 = sel.step1;
        res.selected_step2 = sel.step2;

        ordered_json tuning_json;
        tuning_json["method"] = tuning::method_name(sc.method);
        tuning_json["lambda_step1"] = sel.lambdas.front();
        tuning_json["lambda_step2"] =
            std::vector<double>(sel.lambdas.begin() + 1, sel.lambdas.end());
        ordered_json lj = ordered_json::array();
        for (const auto& psi : sel.loadings)
            lj.push_back(loadings_json(psi, X_hd.names, config.full));
        tuning_json["loadings"] = lj;
        rep["tuning"] = tuning_json;

        ordered_json selj;
        selj["step1"] = sel.step1;
        ordered_json step2;
        for (std::size_t j = 0; j < D.names.size(); ++j) step2[D.names[j]] = sel.step2[j];
        selj["step2"] = step2;
        selj["amelioration"] = spec.amelioration_set;
        selj["union_controls"] = res.union_controls;
        const int s = static_cast<int>(union_ctl.size());
        selj["sparsity_index"] = s;
        selj["sparse_solution"] = solver::is_sparse_solution(
            s, static_cast<int>(X_hd.cols()), static_cast<int>(pl.ds.n_rows()));
        selj["dropped_collinear"] = res.dropped_collinear;
        rep["selection"] = selj;

        ordered_json table = ordered_json::array();
        for (Eigen::Index j = 0; j < res.alpha.size(); ++j)
            table.push_back(Pipeline::estimate_row(res.treatment_names[j], res.alpha(j),
                                                   std::sqrt(res.vcov(j, j))));
        rep["estimates"] = table;
        if (config.full) {
            // nuisance coefficients are omitted by default
            ordered_json nuis = ordered_json::array();
            for (std::size_t j = D.names.size(); j < res.full_names.size(); ++j) {
                ordered_json row;
                row["name"] = res.full_names[j];
                row["coef"] = res.full_coefficients(static_cast<Eigen::Index>(j));
                nuis.push_back(row);
            }
            rep["nuisance_coefficients"] = nuis;
        }
        ordered_json vc = ordered_json::array();
        for (Eigen::Index i = 0; i < res.vcov.rows(); ++i) {
            ordered_json vrow = ordered_json::array();
            for (Eigen::Index j = 0; j < res.vcov.cols(); ++j) vrow.push_back(res.vcov(i, j));
            vc.push_back(vrow);
        }
        rep["vcov"] = vc;
        rep["se_mode"] = linalg::se_mode_name(se);
        rep["estimator"] = "pds";
        pl.finish(out);
        out.tsv = tsv_from_estimates(table);
        return out;
    }

    // chs variants run on the partialled inputs
    const inference::ChsVariant variant = estimator == "chs-lasso"
                                              ? inference::ChsVariant::lasso_orthogonalized
                                              : inference::ChsVariant::post_lasso_orthogonalized;
    const inference::CHSResult res = inference::chs_estimate(
        y_sel, D_sel, X_sel, variant, sc, se, cids,
        dof_absorbed + static_cast<int>(P.cols()));

    ordered_json tuning_json;
    tuning_json["method"] = tuning::method_name(sc.method);
    tuning_json["lambda_step1"] = res.lambdas.empty() ? 0.0 : res.lambdas.front();
    tuning_json["lambda_step2"] = res.lambdas.empty()
                                      ? std::vector<double>{}
                                      : std::vector<double>(res.lambdas.begin() + 1,
                                                            res.lambdas.end());
    ordered_json lj = ordered_json::array();
    for (const auto& psi : res.loadings)
        lj.push_back(loadings_json(psi, X_hd.names, config.full));
    tuning_json["loadings"] = lj;
    rep["tuning"] = tuning_json;

    ordered_json selj;
    selj["step1"] = res.selected_step1;
    ordered_json step2;
    for (std::size_t j = 0; j < D.names.size(); ++j) step2[D.names[j]] = res.selected_step2[j];
    selj["step2"] = step2;
    const std::vector<std::string> union_ctl = union_names(
        X_hd.names,
        [&] {
            std::vector<std::vector<std::string>> sets{res.selected_step1};
            for (const auto& s : res.selected_step2) sets.push_back(s);
            return sets;
        }(),
        {});
    selj["union_controls"] = union_ctl;
    selj["sparsity_index"] = union_ctl.size();
    selj["sparse_solution"] = solver::is_sparse_solution(
        static_cast<int>(union_ctl.size()), static_cast<int>(X_hd.cols()),
        static_cast<int>(pl.ds.n_rows()));
    rep["selection"] = selj;

    ordered_json table = ordered_json::array();
    for (Eigen::Index j = 0; j < res.alpha.size(); ++j)
        table.push_back(Pipeline::estimate_row(res.treatment_names[j], res.alpha(j),
                                               std::sqrt(res.vcov(j, j))));
    rep["estimates"] = table;
    rep["se_mode"] = linalg::se_mode_name(se);
    rep["estimator"] = estimator;
    pl.finish(out);
    out.tsv = tsv_from_estimates(table);
    return out;
}

// ---- ivlasso ----------------------------------------------------------------

RunReport run_ivlasso(Pipeline& pl) {
    const RunConfig& config = pl.config;
    const ModelSpec& spec = pl.spec;
    if (spec.endogenous.empty()) {
        // no endogenous variables: identical to the pds path by construction
        return run_inference(pl);
    }

    const Eigen::VectorXd y = pl.yvec();
    const auto D_endog = pl.named(spec.endogenous);
    std::vector<std::string> exog_treatments;
    for (const auto& t : spec.treatments)
        if (!std::count(spec.endogenous.begin(), spec.endogenous.end(), t))
            exog_treatments.push_back(t);
    const auto X_hd = pl.named(spec.penalized());
    const auto Z_pen = pl.named(spec.instruments_penalized);
    const auto Z_unp = pl.named(spec.instruments_unpenalized);

    std::vector<std::string> unpen_names = exog_treatments;
    unpen_names.insert(unpen_names.end(), spec.focal_unpenalized.begin(),
                       spec.focal_unpenalized.end());
    unpen_names.insert(unpen_names.end(), spec.partial_out.begin(), spec.partial_out.end());
    const auto W = pl.named(unpen_names);

    Eigen::MatrixXd P(pl.ds.n_rows(), W.cols() + 1);
    P.col(0).setOnes();
    if (W.cols() > 0) P.rightCols(W.cols()) = W.values;

    const Eigen::VectorXd y_sel = linalg::partial_out(y, P);
    inference::NamedMatrix D_sel{linalg::partial_out(D_endog.values, P), D_endog.names};
    inference::NamedMatrix X_sel{linalg::partial_out(X_hd.values, P), X_hd.names};
    inference::NamedMatrix Z_sel{linalg::partial_out(Z_pen.values, P), Z_pen.names};
    inference::NamedMatrix Zu_sel{linalg::partial_out(Z_unp.values, P), Z_unp.names};

    const inference::SelectionConfig sc = pl.selection_config();
    const ivhds::IvSelection sel =
        ivhds::iv_lasso_select(y_sel, D_sel, X_sel, Z_sel, sc, &Zu_sel);

    // every endogenous variable needs at least one surviving instrument
    for (std::size_t e = 0; e < spec.endogenous.size(); ++e) {
        if (sel.instruments_step2[e].empty() && Z_unp.names.empty())
            throw NumericError(
                "ivlasso: no instruments survived selection for '" + spec.endogenous[e] +
                "'; instrument selection can fail when the first stage is weak or not "
                "sparse");
    }

    std::vector<std::vector<std::string>> control_sets{sel.controls_step1};
    for (const auto& s : sel.controls_step2) control_sets.push_back(s);
    const std::vector<std::string> union_ctl =
        union_names(X_hd.names, control_sets, spec.amelioration_set);
    std::set<std::string> inst_union_set;
    for (const auto& s : sel.instruments_step2)
        inst_union_set.insert(s.begin(), s.end());
    std::vector<std::string> inst_union;
    for (const auto& name : Z_pen.names)
        if (inst_union_set.count(name)) inst_union.push_back(name);
    inst_union.insert(inst_union.end(), Z_unp.names.begin(), Z_unp.names.end());

    std::vector<std::string> w_final = unpen_names;
    w_final.insert(w_final.end(), union_ctl.begin(), union_ctl.end());

    const std::vector<int> cids = pl.cluster_ids();
    const linalg::SeMode se = pl.se_mode();
    const int dof_absorbed = config.fe ? pl.fe_groups : 0;

    Eigen::MatrixXd lasso_fs;
    const Eigen::MatrixXd* lasso_fs_ptr = nullptr;
    if (config.first_stage == "lasso") {
        // fitted first stage = d minus the part its Step-II lasso left over
        lasso_fs = D_endog.values - sel.step2_unexplained;
        lasso_fs_ptr = &lasso_fs;
    } else if (config.first_stage != "post") {
        throw UserError("--first-stage must be post or lasso");
    }

    const ivhds::IVResult res =
        ivhds::two_sls(y, D_endog, pl.named(w_final), pl.named(inst_union), se, cids,
                       /*intercept=*/!config.fe, dof_absorbed, lasso_fs_ptr);

    pl.header_json();
    ordered_json& rep = pl.report;
    ordered_json tuning_json;
    tuning_json["method"] = tuning::method_name(sc.method);
    tuning_json["lambdas"] = sel.lambdas;
    {
        ordered_json lj = ordered_json::array();
        std::vector<std::string> xz_names = X_hd.names;
        xz_names.insert(xz_names.end(), Z_pen.names.begin(), Z_pen.names.end());
        for (std::size_t e = 0; e < sel.loadings.size(); ++e)
            lj.push_back(loadings_json(sel.loadings[e],
                                       e == 0 ? X_hd.names : xz_names, config.full));
        tuning_json["loadings"] = lj;
    }
    rep["tuning"] = tuning_json;

    ordered_json selj;
    selj["step1"] = sel.controls_step1;
    ordered_json step2c, step2i;
    for (std::size_t e = 0; e < spec.endogenous.size(); ++e) {
        step2c[spec.endogenous[e]] = sel.controls_step2[e];
        step2i[spec.endogenous[e]] = sel.instruments_step2[e];
    }
    selj["step2_controls"] = step2c;
    selj["step2_instruments"] = step2i;
    selj["amelioration"] = spec.amelioration_set;
    selj["union_controls"] = union_ctl;
    selj["instruments_used"] = res.instrument_names;
    selj["sparsity_index"] = union_ctl.size();
    selj["dropped_collinear"] = res.dropped_collinear;
    rep["selection"] = selj;

    ordered_json table = ordered_json::array();
    for (Eigen::Index j = 0; j < res.alpha.size(); ++j)
        table.push_back(Pipeline::estimate_row(res.endogenous_names[j], res.alpha(j),
                                               std::sqrt(res.vcov(j, j))));
    // exogenous treatments ride in the W block; surface them with SEs too
    for (const auto& t : exog_treatments) {
        const auto it = std::find(res.full_names.begin(), res.full_names.end(), t);
        if (it == res.full_names.end()) continue;
        const auto idx = static_cast<Eigen::Index>(it - res.full_names.begin());
        table.push_back(
            Pipeline::estimate_row(t, res.full_coefficients(idx), res.full_se(idx)));
    }
    rep["estimates"] = table;
    ordered_json fs = ordered_json::array();
    for (const auto& st : res.first_stage) {
        ordered_json row;
        row["endogenous"] = st.endogenous;
        row["partial_f"] = st.partial_f;
        row["n_instruments"] = st.n_instruments;
        fs.push_back(row);
    }
    rep["first_stage"] = fs;
    rep["se_mode"] = linalg::se_mode_name(se);
    rep["estimator"] = res.estimator;
    RunReport out;
    pl.finish(out);
    out.tsv = tsv_from_estimates(table);
    return out;
}

}  // namespace

RunReport run(const RunConfig& config) {
    static const std::set<std::string> known{"lasso", "ridge", "path",
                                             "pds",   "chs",   "ivlasso"};
    if (!known.count(config.subcommand))
        throw UserError("unknown subcommand: " + config.subcommand);
    if (config.format != "json" && config.format != "tsv")
        throw UserError("--format must be json or tsv");

    Pipeline pl(config);
    pl.load_and_resolve();
    if (config.subcommand == "pds" || config.subcommand == "chs") return run_inference(pl);
    if (config.subcommand == "ivlasso") return run_ivlasso(pl);
    return run_penalized(pl);
}

void write_report(const RunReport& report, const RunConfig& config) {
    const std::string payload =
        config.format == "tsv" ? report.tsv : report.json.dump(2) + "\n";
    if (config.out_path.empty()) {
        std::fwrite(payload.data(), 1, payload.size(), stdout);
        return;
    }
    // atomic write: temp file in the target directory, then rename
    namespace fs = std::filesystem;
    const fs::path target(config.out_path);
    const fs::path tmp = target.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw UserError("cannot write output file: " + tmp.string());
        out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    }
    fs::rename(tmp, target);
}

}  // namespace hdselect::cli
