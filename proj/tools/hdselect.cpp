#include <cstdio>
#include <exception>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hdselect/cli.hpp"
#include "hdselect/errors.hpp"

using hdselect::cli::RunConfig;

namespace {

void add_common(CLI::App* cmd, RunConfig& config) {
    cmd->add_option("--data", config.data_path, "input CSV file")->required();
    cmd->add_option("--model", config.model,
                    "model string, e.g. \"y x1 (x2-x10 c*)\" or \"y (d = z*) (c*)\"")
        ->required();
    cmd->add_option("--pnotpen", config.pnotpen, "unpenalized variables (space separated)");
    cmd->add_option("--aset", config.aset, "amelioration set: joins the final regression "
                                           "without passing through the lasso steps");
    cmd->add_option("--partial", config.partial,
                    "variables partialled out prior to estimation (not reported)");
    cmd->add_flag("--robust", config.robust, "heteroskedasticity-robust standard errors");
    cmd->add_option("--cluster", config.cluster, "cluster-robust SEs on this column");
    cmd->add_flag("--fe", config.fe, "panel fixed effects (within transform)");
    cmd->add_option("--panel", config.panel, "panel id column (required with --fe)");
    cmd->add_option("--time", config.time, "time id column");
    cmd->add_option("--tune", config.tune, "lambda selection: rigorous|cv|aic|bic|ebic");
    cmd->add_option("--lambda", config.lambda, "fixed penalty level (skips tuning)");
    cmd->add_option("--folds", config.folds, "cross-validation folds")
        ->check(CLI::Range(2, 1000000));
    cmd->add_option("--grid-points", config.grid.n_points, "lambda grid size");
    cmd->add_option("--grid-min-ratio", config.grid.min_ratio, "smallest lambda ratio");
    cmd->add_option("--seed", config.seed, "random seed (cv folds, provenance)");
    cmd->add_option("--out", config.out_path, "output file (default stdout)");
    cmd->add_option("--format", config.format, "output format: json|tsv");
    cmd->add_flag("--full", config.full, "include nuisance coefficients in the report");
    cmd->add_option("--threads", config.threads,
                    "worker threads (0 = hardware; capped by HDSELECT_THREADS)");
    cmd->add_option(
        "--delimiter",
        [&config](const std::vector<std::string>& v) {
            if (v.empty() || v[0].size() != 1) return false;
            config.csv.delimiter = v[0][0];
            return true;
        },
        "CSV delimiter (single character)");
    cmd->add_option("--na", config.csv.na_markers, "missing-value markers");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hdselect: high-dimensional sparse regression and post-selection inference"};
    app.require_subcommand(1);

    RunConfig config;
    for (const char* name : {"lasso", "ridge", "path", "pds", "chs", "ivlasso"}) {
        CLI::App* cmd = app.add_subcommand(name);
        add_common(cmd, config);
        if (std::string(name) == "pds" || std::string(name) == "chs")
            cmd->add_option("--post", config.post, "estimator: pds|chs-lasso|chs-post");
        if (std::string(name) == "ivlasso")
            cmd->add_option("--first-stage", config.first_stage,
                            "first-stage fitted values: post|lasso");
        cmd->callback([&config, name] { config.subcommand = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        const hdselect::cli::RunReport report = hdselect::cli::run(config);
        hdselect::cli::write_report(report, config);
        return report.exit_code;
    } catch (const hdselect::UserError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const hdselect::NumericError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
