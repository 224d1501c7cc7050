#pragma once
#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace hdselect {

// Tabular data: ordered named columns of equal length. Numeric columns hold
// values directly; categorical columns (from CSV cells that never parse as
// numbers) hold level indices plus a level table and are only usable through
// one_hot_encode. Missing cells are stored as NaN until listwise deletion.
class Dataset {
public:
    Dataset() = default;

    void add_column(std::string name, std::vector<double> values);
    void add_categorical(std::string name, std::vector<double> level_indices,
                         std::vector<std::string> levels);

    std::size_t n_rows() const { return n_rows_; }
    std::size_t n_cols() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    bool has_column(const std::string& name) const;
    int column_index(const std::string& name) const;  // -1 if absent
    const std::vector<double>& column(const std::string& name) const;
    const std::vector<double>& column(std::size_t idx) const;
    bool is_categorical(const std::string& name) const;
    const std::vector<std::string>& levels(const std::string& name) const;

    // Keep only the rows listed (in order).
    Dataset select_rows(const std::vector<int>& rows) const;

    // Drop rows with NaN in any of `used` columns; returns dropped count.
    std::size_t drop_missing(const std::vector<std::string>& used);

    // numeric matrix of the named columns, in the order given
    Eigen::MatrixXd matrix(const std::vector<std::string>& cols) const;

    std::optional<std::string> panel_id;
    std::optional<std::string> time_id;
    std::optional<std::string> cluster_id;

private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> cols_;
    std::vector<std::vector<std::string>> levels_;  // empty for numeric columns
    std::unordered_map<std::string, std::size_t> index_;
    std::size_t n_rows_ = 0;
};

struct CsvOptions {
    char delimiter = ',';
    bool header = true;
    std::vector<std::string> na_markers = {"", "NA", "."};
};

// RFC-4180-style parser (quoted fields, escaped quotes, configurable
// delimiter). Ragged rows, duplicate headers and mixed numeric/text columns
// are errors; missing cells become NaN for later listwise deletion.
Dataset load_csv(const std::string& path, const CsvOptions& options = {});

// Variable roles for one estimation, by column name.
struct ModelSpec {
    std::string dependent;
    std::vector<std::string> treatments;            // variables of interest (the d's)
    std::vector<std::string> endogenous;            // subset of treatments, instrumented
    std::vector<std::string> focal_unpenalized;     // always-in controls, never penalized
    std::vector<std::string> auxiliary_penalized;   // low-dimension penalized regressors
    std::vector<std::string> hd_controls_penalized; // high-dimension penalized controls
    std::vector<std::string> instruments_penalized;
    std::vector<std::string> instruments_unpenalized;
    std::vector<std::string> amelioration_set;      // forced into the final regression only
    std::vector<std::string> partial_out;           // projected out everywhere, unreported

    struct Options {
        bool robust = false;
        std::optional<std::string> cluster;
        bool fe = false;
        std::uint64_t seed = 0;
    } options;

    std::vector<std::string> penalized() const;     // auxiliary + hd controls
    std::vector<std::string> all_columns() const;   // every referenced column

    // Disjointness, endogenous/instrument coupling, presence in `ds`.
    // `needs_unpenalized` enforces the >=1 unpenalized regressor rule of the
    // PDS/CHS/IV estimators.
    void validate(const Dataset& ds, bool needs_unpenalized) const;
};

enum class ScaleFlag { standardized, centered, constant, untouched };

// Per-column mean/scale bookkeeping for mapping coefficients back.
struct StandardizationRecord {
    struct Entry {
        std::string name;
        double mean = 0.0;
        double scale = 1.0;
        ScaleFlag flag = ScaleFlag::untouched;
    };
    std::vector<Entry> entries;
    const Entry* find(const std::string& name) const;
};

struct StandardizeResult {
    Dataset data;
    StandardizationRecord record;
    std::vector<std::string> dropped_constant;  // constant unpenalized columns
};

// Mean 0 / variance 1 with divisor N (so sum x^2 = N exactly) for `penalized`
// and `unpenalized` columns; `center_only` columns lose their mean but keep
// scale. A constant penalized column is an error naming the column; constant
// unpenalized columns are dropped with a warning entry.
StandardizeResult standardize(const Dataset& ds, const std::vector<std::string>& penalized,
                              const std::vector<std::string>& unpenalized = {},
                              const std::vector<std::string>& center_only = {});

// Replace a categorical (or discrete numeric) column by level dummies named
// <column>_<level>. With drop_reference the lexicographically first level is
// omitted.
Dataset one_hot_encode(const Dataset& ds, const std::string& column, bool drop_reference);

struct OriginalScaleFit {
    std::vector<double> coefficients;
    double intercept = 0.0;
};

// Map standardized-scale coefficients (aligned with `names`) back to
// original units; the intercept is rebuilt from the stored means, including
// the centered dependent's.
OriginalScaleFit destandardize(const Eigen::VectorXd& coeffs,
                               const std::vector<std::string>& names,
                               const StandardizationRecord& record,
                               const std::string& dependent);

}  // namespace hdselect
