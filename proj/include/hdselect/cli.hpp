#pragma once
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdselect/dataset.hpp"
#include "hdselect/solver.hpp"

namespace hdselect::cli {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr const char* kSchemaVersion = "1";

// Expand a model-grammar token list against the header: literal names,
// globs (c*), and ranges (c1-c5000, resolved by header order). Unknown
// names raise UserError listing the token.
std::vector<std::string> expand_tokens(const std::vector<std::string>& tokens,
                                       const std::vector<std::string>& header);

// Parse the estimation grammar
//   y x1 x2 (x3 x4 c*) (d1 d2 = z*)
// bare names -> unpenalized variables of interest; the parenthesized group
// without '=' -> penalized set; the group with '=' -> endogenous = instruments.
ModelSpec parse_model(const std::string& model, const std::vector<std::string>& header);

struct RunConfig {
    std::string subcommand;  // lasso | ridge | path | pds | chs | ivlasso
    std::string data_path;
    std::string model;
    CsvOptions csv;

    std::vector<std::string> pnotpen;
    std::vector<std::string> aset;
    std::vector<std::string> partial;
    bool robust = false;
    std::string cluster;
    bool fe = false;
    std::string panel;
    std::string time;
    std::string post;              // pds | chs-lasso | chs-post
    std::string tune;              // rigorous | cv | aic | bic | ebic
    std::string first_stage = "post";  // post | lasso (ivlasso only)
    double lambda = -1.0;          // fixed lambda when >= 0
    int folds = 10;
    solver::PathGrid grid;
    std::uint64_t seed = 0;
    std::string out_path;          // empty -> stdout
    std::string format = "json";   // json | tsv
    bool full = false;
    std::size_t threads = 0;       // 0 -> hardware, capped by HDSELECT_THREADS
};

struct RunReport {
    int exit_code = 0;
    nlohmann::ordered_json json;
    std::string tsv;
};

// Execute the full pipeline: load -> roles -> fe -> standardize -> tune ->
// select -> estimate -> report. Throws UserError / NumericError; main maps
// them to exit codes 1 / 2.
RunReport run(const RunConfig& config);

// Serialize and write the report (atomically when a path is given).
void write_report(const RunReport& report, const RunConfig& config);

}  // namespace hdselect::cli
